"""Curriculum samplers: distance cache, stride selection, modality schedule."""

import numpy as np
import pytest

from skybench.curriculum import (
    CurriculumProgress,
    DistanceCache,
    ModalityCounts,
    build_distance_cache,
    curriculum_sample,
    composed_sample,
    load_distance_cache,
    modality_counts,
    sample_by_modality,
    save_distance_cache,
)
from skybench.errors import DataError, InputError, InsufficientViews, InvalidBatch
from skybench.geometry import UnitQuaternion, pair_distance
from skybench.scenegen import (
    HelixBand,
    HelixConfig,
    SiteConfig,
    ViewRecord,
    generate_site,
    intrinsics_for,
)

INTR = intrinsics_for(32, 32, 60.0)


def view_at(view_id, x, quat=None):
    quat = quat or UnitQuaternion.identity()
    return ViewRecord(view_id, "ground", quat, np.array([x, 0.0, 0.0]), INTR, 5.0)


def random_views(seed, m):
    rng = np.random.default_rng(seed)
    views = []
    for i in range(m):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        views.append(
            ViewRecord(
                f"v_{i:04d}",
                "ground",
                UnitQuaternion.from_components(*q),
                rng.uniform(-50.0, 50.0, size=3),
                INTR,
                5.0,
            )
        )
    return views


def line_cache(m):
    """Anchor at index 0; candidate i sits at distance i (i = 1..m-1)."""
    views = [view_at(f"v_{i:04d}", 2.0 * i) for i in range(m)]
    return build_distance_cache(views)


# ------------------------------------------------------------------ cache


def test_cache_identical_poses_is_zero():
    views = [view_at("a", 3.0), view_at("b", 3.0)]
    cache = build_distance_cache(views)
    assert cache.d.shape == (2, 2)
    assert np.array_equal(cache.d, np.zeros((2, 2)))


def test_cache_matches_direct_recomputation():
    views = random_views(11, 10)
    cache = build_distance_cache(views)
    for i in range(10):
        for j in range(10):
            direct = 0.0 if i == j else pair_distance(views[i].pose(), views[j].pose(), 0.5)
            assert cache.d[i, j] == direct
    assert np.array_equal(cache.d, cache.d.T)
    assert np.all(np.diag(cache.d) == 0.0)


def test_cache_respects_lambda():
    views = random_views(4, 5)
    a = build_distance_cache(views, lambda_t=0.5)
    b = build_distance_cache(views, lambda_t=0.0)
    assert not np.array_equal(a.d, b.d)
    assert b.d[0, 1] == pair_distance(views[0].pose(), views[1].pose(), 0.0)


def test_cache_requires_two_views():
    with pytest.raises(InputError):
        build_distance_cache([view_at("a", 0.0)])


def test_cache_validation():
    with pytest.raises(InputError, match="symmetric"):
        DistanceCache(ids=("a", "b"), d=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(InputError, match="diagonal"):
        DistanceCache(ids=("a", "b"), d=np.array([[1.0, 2.0], [2.0, 0.0]]))
    with pytest.raises(InputError, match="unique"):
        DistanceCache(ids=("a", "a"), d=np.zeros((2, 2)))
    with pytest.raises(InputError):
        DistanceCache(ids=("a", "b"), d=np.zeros((3, 3)))


def test_cache_save_load_round_trip(tmp_path):
    views = random_views(2, 7)
    cache = build_distance_cache(views)
    path = save_distance_cache(cache, tmp_path / "site.skyc")
    blob = path.read_bytes()
    assert blob[:4] == b"SKYC"
    assert len(blob) == 8 + 4 * 49
    back = load_distance_cache(path, ids=cache.ids)
    assert back.ids == cache.ids
    expected = cache.d.astype(np.float32).astype(np.float64)
    assert np.array_equal(back.d, expected)
    anon = load_distance_cache(path)
    assert anon.ids == tuple(str(i) for i in range(7))


def test_cache_load_errors(tmp_path):
    cache = build_distance_cache(random_views(3, 4))
    path = save_distance_cache(cache, tmp_path / "c.skyc")
    blob = path.read_bytes()
    bad = tmp_path / "bad.skyc"
    bad.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(DataError):
        load_distance_cache(bad)
    short = tmp_path / "short.skyc"
    short.write_bytes(blob[:-4])
    with pytest.raises(DataError):
        load_distance_cache(short)
    with pytest.raises(InputError):
        load_distance_cache(path, ids=("just", "three", "ids"))


# -------------------------------------------------------- distance sampler


def test_curriculum_tau_zero_returns_nearest():
    cache = line_cache(11)
    got = curriculum_sample(0, cache, 3, CurriculumProgress(0.0))
    assert got == [1, 2, 3]


def test_curriculum_tau_one_strides_full_range():
    # Prefix covers all 10 candidates; picks land at sorted slots 0, 4, 9.
    cache = line_cache(11)
    got = curriculum_sample(0, cache, 3, CurriculumProgress(1.0))
    assert got == [1, 5, 10]


def test_curriculum_full_coverage():
    cache = line_cache(11)
    for tau in (0.0, 0.3, 1.0):
        got = curriculum_sample(0, cache, 10, CurriculumProgress(tau))
        assert sorted(got) == list(range(1, 11))


def test_curriculum_single_view_is_nearest():
    cache = line_cache(8)
    for tau in (0.0, 0.5, 1.0):
        assert curriculum_sample(0, cache, 1, CurriculumProgress(tau)) == [1]


def test_curriculum_anchor_not_first_view():
    views = [view_at(f"v{i}", 2.0 * i) for i in range(6)]
    cache = build_distance_cache(views)
    got = curriculum_sample(3, cache, 2, CurriculumProgress(0.0))
    assert got == [2, 4] or got == [4, 2]
    # Distances from index 3 tie at 1.0 for indices 2 and 4; index order wins.
    assert got == [2, 4]


def test_curriculum_distance_ties_break_by_index():
    views = [view_at("anchor", 0.0), view_at("pos", 2.0), view_at("neg", -2.0)]
    cache = build_distance_cache(views)
    assert curriculum_sample(0, cache, 2, CurriculumProgress(0.0)) == [1, 2]


def test_curriculum_errors():
    cache = line_cache(5)
    with pytest.raises(InsufficientViews):
        curriculum_sample(0, cache, 5, CurriculumProgress(0.0))
    with pytest.raises(InputError):
        curriculum_sample(9, cache, 2, CurriculumProgress(0.0))
    with pytest.raises(InputError):
        curriculum_sample(0, cache, 0, CurriculumProgress(0.0))
    with pytest.raises(InputError):
        CurriculumProgress(1.5)
    with pytest.raises(InputError):
        CurriculumProgress(-0.1)


def test_curriculum_mean_distance_nondecreasing_in_tau():
    taus = np.linspace(0.0, 1.0, 11)
    for seed in range(20):
        cache = build_distance_cache(random_views(seed, 15))
        nearest = curriculum_sample(0, cache, 4, CurriculumProgress(0.0))[0]
        prev = -1.0
        for tau in taus:
            got = curriculum_sample(0, cache, 4, CurriculumProgress(float(tau)))
            assert len(set(got)) == 4
            assert nearest in got  # the nearest view is always included
            mean = float(np.mean([cache.d[0, i] for i in got]))
            assert mean >= prev - 1e-12
            prev = mean


# ------------------------------------------------------- modality schedule


def test_modality_worked_examples():
    assert modality_counts(8, CurriculumProgress(0.0)) == ModalityCounts(6, 1, 1)
    assert modality_counts(8, CurriculumProgress(0.5)) == ModalityCounts(3, 3, 2)
    assert modality_counts(8, CurriculumProgress(1.0)) == ModalityCounts(0, 4, 4)


def test_modality_conservation_grid():
    taus = np.linspace(0.0, 1.0, 101)
    for n_total in (3, 4, 8, 17):
        prev_a = n_total
        for tau in taus:
            c = modality_counts(n_total, CurriculumProgress(float(tau)))
            assert c.total == n_total
            assert c.n_g >= 1 and c.n_s >= 1 and c.n_a >= 0
            assert c.n_a <= prev_a  # aerial count never grows with tau
            prev_a = c.n_a
        assert modality_counts(n_total, CurriculumProgress(0.0)).n_a == n_total - 2
        assert modality_counts(n_total, CurriculumProgress(1.0)).n_a == 0


def test_modality_ground_takes_odd_leftover():
    c = modality_counts(7, CurriculumProgress(1.0))
    assert (c.n_a, c.n_g, c.n_s) == (0, 4, 3)


def test_modality_rejects_small_batches():
    with pytest.raises(InvalidBatch):
        modality_counts(2, CurriculumProgress(0.0))


def small_site():
    config = SiteConfig(
        ground_count=6,
        satellite_count=6,
        helix=HelixConfig(bands=(HelixBand(300.0, 200.0, 2),)),
    )
    return generate_site(config)[1]


def test_modality_sample_draws_requested_counts():
    manifest = small_site()
    counts = ModalityCounts(n_a=2, n_g=2, n_s=2)
    ids = sample_by_modality(manifest, counts, rng_seed=0)
    assert len(ids) == 6
    assert len(set(ids)) == 6
    by_mod = {"ground": 0, "aerial": 0, "satellite": 0}
    for vid in ids:
        by_mod[manifest.view_by_id(vid).modality] += 1
    assert by_mod == {"ground": 2, "aerial": 2, "satellite": 2}


def test_modality_sample_minimal_counts():
    manifest = small_site()
    ids = sample_by_modality(manifest, ModalityCounts(n_a=0, n_g=1, n_s=1), rng_seed=3)
    mods = sorted(manifest.view_by_id(v).modality for v in ids)
    assert mods == ["ground", "satellite"]


def test_modality_sample_deterministic():
    manifest = small_site()
    counts = ModalityCounts(n_a=2, n_g=2, n_s=2)
    a = sample_by_modality(manifest, counts, rng_seed=42)
    b = sample_by_modality(manifest, counts, rng_seed=42)
    assert a == b
    others = [sample_by_modality(manifest, counts, rng_seed=s) for s in range(5)]
    assert any(o != a for o in others)


def test_modality_sample_insufficient_names_modality():
    manifest = small_site()
    with pytest.raises(InsufficientViews, match="ground"):
        sample_by_modality(manifest, ModalityCounts(n_a=0, n_g=7, n_s=1), rng_seed=0)


# --------------------------------------------------------------- composed


def test_composed_sample_counts_and_determinism():
    manifest = small_site()
    cache = build_distance_cache(manifest.views)
    anchor = manifest.by_modality("ground")[0].id
    ids = composed_sample(manifest, cache, anchor, 6, CurriculumProgress(0.5))
    assert len(ids) == 6
    assert anchor not in ids
    by_mod = {"ground": 0, "aerial": 0, "satellite": 0}
    for vid in ids:
        by_mod[manifest.view_by_id(vid).modality] += 1
    c = modality_counts(6, CurriculumProgress(0.5))
    assert by_mod == {"ground": c.n_g, "aerial": c.n_a, "satellite": c.n_s}
    assert ids == composed_sample(manifest, cache, anchor, 6, CurriculumProgress(0.5))


def test_composed_sample_rejects_mismatched_cache():
    manifest = small_site()
    cache = build_distance_cache(manifest.views[:-1])
    with pytest.raises(InputError, match="cache"):
        composed_sample(manifest, cache, manifest.views[0].id, 4, CurriculumProgress(0.0))


def test_composed_sample_unknown_anchor():
    manifest = small_site()
    cache = build_distance_cache(manifest.views)
    with pytest.raises(InputError):
        composed_sample(manifest, cache, "nope", 4, CurriculumProgress(0.0))
