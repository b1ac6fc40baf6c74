"""Acceptance gate: every headline property, timed, one printed line each.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
pass/fail lines; each test also enforces its runtime budget.
"""

import itertools
import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from skybench.cli import main
from skybench.curriculum import (
    CurriculumProgress,
    build_distance_cache,
    curriculum_sample,
    load_distance_cache,
    modality_counts,
    save_distance_cache,
)
from skybench.evaluation import EvalConfig, evaluate_poses, pair_errors, psnr
from skybench.geometry import (
    CameraVector9,
    Pose,
    Rotation3,
    UnitQuaternion,
    pair_distance,
    quat_to_rotation,
    rotation_about_axis,
    rotation_about_z,
    rotation_geodesic_distance,
    weighted_similarity_procrustes,
)
from skybench.model import (
    ForwardOutput,
    ModelConfig,
    attention,
    build_attention_mask,
    build_weight_bank,
    compute_loss,
    forward_model,
)
from skybench.scenegen import (
    ALTITUDE_BANDS,
    HeightfieldScene,
    SiteConfig,
    ViewRecord,
    intrinsics_for,
    nadir_rotation,
    read_depth_raster,
    render_depth,
    unproject,
    write_site,
)
from skybench.tilemath import TileCoord, quadkey_to_tile, tile_to_quadkey, tile_url

TOY = ModelConfig(blocks=4, width=32, heads=4, patch=16)


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.perf_counter() - start
    verdict = "PASS" if elapsed < budget_s else "FAIL"
    print(f"[{verdict}] {name} ({elapsed:.2f}s, budget {budget_s:.0f}s)")
    assert elapsed < budget_s, f"{name}: {elapsed:.2f}s exceeded {budget_s}s"


def random_rotation(rng) -> Rotation3:
    return quat_to_rotation(UnitQuaternion.from_components(*rng.standard_normal(4)))


def random_pose(rng) -> Pose:
    return Pose(random_rotation(rng), rng.standard_normal(3))


# ---------------------------------------------------------------- criteria


def test_pose_metric_examples_and_invariance():
    with criterion("pose metric: examples, symmetry, left-invariance", 1.0):
        ident = Rotation3.identity()
        assert rotation_geodesic_distance(ident, ident) == 0.0
        assert abs(rotation_geodesic_distance(ident, rotation_about_z(math.pi)) - 1.0) < 1e-9
        assert abs(rotation_geodesic_distance(ident, rotation_about_z(math.pi / 2)) - 0.5) < 1e-9

        rng = np.random.default_rng(42)
        for _ in range(1000):
            r1, r2, q = random_rotation(rng), random_rotation(rng), random_rotation(rng)
            d = rotation_geodesic_distance(r1, r2)
            assert 0.0 <= d <= 1.0
            assert abs(d - rotation_geodesic_distance(r2, r1)) < 1e-9
            left1 = Rotation3(q.matrix @ r1.matrix)
            left2 = Rotation3(q.matrix @ r2.matrix)
            assert abs(rotation_geodesic_distance(left1, left2) - d) < 1e-9

        p = random_pose(rng)
        assert pair_distance(p, p, 0.5) == 0.0
        half_turn = Pose(rotation_about_z(math.pi / 2), np.array([2.0, 0.0, 0.0]))
        origin = Pose(Rotation3.identity(), np.zeros(3))
        assert abs(pair_distance(origin, half_turn, 0.5) - 1.5) < 1e-9
        q2 = random_pose(rng)
        assert pair_distance(p, q2, 0.0) == rotation_geodesic_distance(p.rotation, q2.rotation)
        # the default weight is 0.5
        assert pair_distance(p, q2) == pair_distance(p, q2, 0.5)


def test_quadkey_round_trip_and_url():
    with criterion("quadkey: zoom<=6 round trip, hand traces, URL bytes", 1.0):
        seen = 0
        for zoom in range(7):
            for x in range(1 << zoom):
                for y in range(1 << zoom):
                    tile = TileCoord(x, y, zoom)
                    key = tile_to_quadkey(tile)
                    assert len(key) == zoom
                    assert quadkey_to_tile(key) == tile
                    seen += 1
        assert seen == 5461

        assert tile_to_quadkey(TileCoord(0, 0, 1)) == "0"
        assert tile_to_quadkey(TileCoord(3, 5, 3)) == "213"
        assert tile_url("213").encode() == (
            b"https://ecn.t3.tiles.virtualearth.net/tiles/a213.jpeg?g=1"
        )
        assert tile_url("0").encode() == (
            b"https://ecn.t3.tiles.virtualearth.net/tiles/a0.jpeg?g=1"
        )


def test_masked_attention_information_flow():
    with criterion("masked attention: blind streams, mask blocks, row sums", 10.0):
        bank = build_weight_bank(TOY)
        params = bank.as_float64()
        rng = np.random.default_rng(0)
        tags = ["ground", "aerial", "satellite", "satellite"]
        images = [rng.random((32, 32)) for _ in tags]
        out_a = forward_model(images, tags, TOY, bank)

        images_b = [img.copy() for img in images]
        images_b[2] = rng.random((32, 32))
        images_b[3] = images_b[3] * 0.5
        out_b = forward_model(images_b, tags, TOY, bank)

        for i in (0, 1):  # non-satellite frames are bit-identical
            assert np.array_equal(out_a.cameras[i].as_array(), out_b.cameras[i].as_array())
            assert np.array_equal(out_a.depths[i], out_b.depths[i])
        for i in (2, 3):  # satellite outputs respond to their inputs
            assert not np.array_equal(out_a.depths[i], out_b.depths[i])

        # block structure, enumerated over every tag sequence up to 6 frames
        for n in range(1, 7):
            for combo in itertools.product(("ground", "aerial", "satellite"), repeat=n):
                mask = build_attention_mask(combo, 2)
                frame_of = np.repeat(np.arange(n), 2)
                for qi in range(2 * n):
                    for ki in range(2 * n):
                        blocked = (
                            combo[frame_of[qi]] != "satellite"
                            and combo[frame_of[ki]] == "satellite"
                        )
                        assert mask[qi, ki] == (not blocked)

        x = rng.standard_normal((8, TOY.width))
        mask = build_attention_mask(tags, 2)
        _, weights = attention(
            params, "joint/0/global_attn", x, TOY.heads, mask=mask, return_weights=True
        )
        np.testing.assert_allclose(weights.sum(axis=-1), 1.0, rtol=0, atol=1e-9)
        _, plain = attention(
            params, "joint/1/global_attn", x, TOY.heads, return_weights=True
        )
        np.testing.assert_allclose(plain.sum(axis=-1), 1.0, rtol=0, atol=1e-9)


def test_permutation_equivariance():
    with criterion("permutation equivariance: 20 seeded batches, exact", 10.0):
        bank = build_weight_bank(TOY)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 6))
            tags = [str(rng.choice(["ground", "aerial", "satellite"])) for _ in range(n)]
            images = [rng.random((32, 32)) for _ in range(n)]
            base = forward_model(images, tags, TOY, bank)

            perm = [0] + list(1 + rng.permutation(n - 1))
            out = forward_model(
                [images[i] for i in perm], [tags[i] for i in perm], TOY, bank
            )
            for new_idx, old_idx in enumerate(perm):
                assert np.array_equal(
                    out.cameras[new_idx].as_array(), base.cameras[old_idx].as_array()
                )
                assert np.array_equal(out.depths[new_idx], base.depths[old_idx])
                assert out.provenance[new_idx] == base.provenance[old_idx]


def _line_views(m):
    intr = intrinsics_for(32, 32, 60.0)
    return [
        ViewRecord(
            f"v_{i:04d}", "ground", UnitQuaternion.identity(),
            np.array([2.0 * i, 0.0, 0.0]), intr, 5.0,
        )
        for i in range(m)
    ]


def _random_views(seed, m):
    rng = np.random.default_rng(seed)
    intr = intrinsics_for(32, 32, 60.0)
    return [
        ViewRecord(
            f"v_{i:04d}", "ground",
            UnitQuaternion.from_components(*rng.normal(size=4)),
            rng.uniform(-50.0, 50.0, size=3), intr, 5.0,
        )
        for i in range(m)
    ]


def test_curriculum_schedule_and_sampler(tmp_path):
    with criterion("curriculum: endpoints, conservation, monotone, cache", 5.0):
        for n_total in (3, 4, 8, 17):
            assert modality_counts(n_total, CurriculumProgress(0.0)).n_a == n_total - 2
            assert modality_counts(n_total, CurriculumProgress(1.0)).n_a == 0
            for tau in np.linspace(0.0, 1.0, 101):
                c = modality_counts(n_total, CurriculumProgress(float(tau)))
                assert c.n_a + c.n_g + c.n_s == n_total

        cache = build_distance_cache(_line_views(11))
        assert curriculum_sample(0, cache, 3, CurriculumProgress(0.0)) == [1, 2, 3]

        for seed in range(20):
            cache = build_distance_cache(_random_views(seed, 15))
            prev = -1.0
            for tau in np.linspace(0.0, 1.0, 11):
                got = curriculum_sample(0, cache, 4, CurriculumProgress(float(tau)))
                mean = float(np.mean([cache.d[0, i] for i in got]))
                assert mean >= prev - 1e-12
                prev = mean

        views = _random_views(99, 10)
        cache = build_distance_cache(views)
        for i in range(10):
            for j in range(10):
                direct = pair_distance(views[i].pose(), views[j].pose(), 0.5)
                assert cache.d[i, j] == (0.0 if i == j else direct)
        path = save_distance_cache(cache, tmp_path / "d.skyc")
        loaded = load_distance_cache(path, ids=cache.ids)
        # the file stores f32; the round trip is exact at that precision
        assert np.array_equal(loaded.d, cache.d.astype(np.float32).astype(np.float64))
        assert loaded.ids == cache.ids


def test_rra_rta_protocol(capsys):
    with criterion("pose accuracy: fixtures, gauge invariance, oracle", 5.0):
        cfg = EvalConfig()
        assert cfg.rot_threshold_deg == 5.0 and cfg.trans_threshold_deg == 5.0

        rng = np.random.default_rng(0)
        poses = [random_pose(rng) for _ in range(4)]
        tags = ["ground", "aerial", "satellite", "ground"]
        perfect = evaluate_poses(poses, poses, tags)
        assert perfect.avg == 100.0
        for bucket in perfect.buckets.values():
            assert bucket.rra == 100.0 and bucket.rta == 100.0

        gt = [
            Pose(Rotation3.identity(), np.array([0.0, 0.0, 4.0 * i])) for i in range(3)
        ]
        pred = list(gt)
        pred[1] = Pose(rotation_about_z(math.radians(6.0)), gt[1].translation)
        fixture = evaluate_poses(pred, gt, ["ground"] * 3)
        assert abs(fixture.buckets["ground"].rra - 33.3) <= 0.05
        assert fixture.buckets["ground"].rta == 100.0

        base = pair_errors(pred, gt, ["ground"] * 3)
        for _ in range(100):
            gauge_r = rotation_about_axis(
                rng.standard_normal(3), float(rng.uniform(-math.pi, math.pi))
            )
            gauge_t = rng.standard_normal(3) * 10.0
            scale = float(rng.uniform(0.1, 10.0))
            moved = [
                Pose(
                    Rotation3(p.rotation.matrix @ gauge_r.matrix),
                    scale * (p.translation + p.rotation.matrix @ gauge_t),
                )
                for p in pred
            ]
            for e0, e1 in zip(base, pair_errors(moved, gt, ["ground"] * 3)):
                assert abs(e0.rot_err_deg - e1.rot_err_deg) < 1e-9
                assert abs(e0.trans_err_deg - e1.trans_err_deg) < 1e-9

        for n in (2, 3, 4, 5, 6):
            pred_n = [random_pose(rng) for _ in range(n)]
            gt_n = [random_pose(rng) for _ in range(n)]
            tags_n = [str(rng.choice(["ground", "aerial", "satellite"])) for _ in range(n)]
            report = evaluate_poses(pred_n, gt_n, tags_n)
            hits = {b: [0, 0, 0] for b in ("ground", "aerial", "satellite")}
            for i in range(n):
                for j in range(i + 1, n):
                    rp = pred_n[j].rotation.matrix @ pred_n[i].rotation.matrix.T
                    rg = gt_n[j].rotation.matrix @ gt_n[i].rotation.matrix.T
                    c = (np.trace(rp.T @ rg) - 1.0) / 2.0
                    rot = math.degrees(math.acos(min(1.0, max(-1.0, float(c)))))
                    tp = pred_n[j].translation - rp @ pred_n[i].translation
                    tg = gt_n[j].translation - rg @ gt_n[i].translation
                    cc = np.dot(tp, tg) / (np.linalg.norm(tp) * np.linalg.norm(tg))
                    trans = math.degrees(math.acos(min(1.0, max(-1.0, float(cc)))))
                    for b in {tags_n[i], tags_n[j]}:
                        hits[b][0] += 1
                        hits[b][1] += rot < 5.0
                        hits[b][2] += trans < 5.0
            for b, (total, r_ok, t_ok) in hits.items():
                if total == 0:
                    assert b in report.missing
                else:
                    assert report.buckets[b].rra == 100.0 * r_ok / total
                    assert report.buckets[b].rta == 100.0 * t_ok / total


def _camera(tx=0.0, ty=0.0, tz=0.0):
    return CameraVector9(
        UnitQuaternion.identity(),
        np.array([tx, ty, tz], dtype=np.float64),
        math.radians(60.0),
        math.radians(45.0),
    )


def test_loss_arithmetic():
    with criterion("loss arithmetic: three examples exact, weight 0.4", 5.0):
        cams = [_camera(1, 2, 3), _camera(4, 5, 6)]
        depths = [np.full((4, 4), 7.0), np.full((4, 4), 2.0)]
        pred = ForwardOutput(tuple(cams), tuple(depths), ("joint", "satellite"))
        total, _ = compute_loss(pred, cams, depths, ["ground", "satellite"])
        assert total == 0.0

        # translation off by 3 per axis: camera MAE is exactly 1
        gt = [_camera(0, 0, 0), _camera(1, 1, 1)]
        pred_cams = [_camera(3, 3, 3), _camera(4, 4, 4)]
        depth = np.full((4, 4), 5.0)
        pred = ForwardOutput(tuple(pred_cams), (depth, depth), ("joint", "joint"))
        total, parts = compute_loss(pred, gt, [depth, depth], ["ground", "aerial"])
        assert parts["camera_ground_aerial"] == 1.0
        assert total == 0.4

        gt = [_camera(0, 0, 0)]
        pred = ForwardOutput((_camera(4.5, 0, 0),), (depth,), ("satellite",))
        total, parts = compute_loss(pred, gt, [depth], ["satellite"])
        assert parts["camera_satellite"] == 0.5
        assert total == 0.5

        # the default weight equals an explicit 0.4
        pred = ForwardOutput(tuple(pred_cams), (depth, depth), ("joint", "joint"))
        by_default, _ = compute_loss(pred, gt * 2, [depth, depth], ["ground", "aerial"])
        explicit, _ = compute_loss(
            pred, gt * 2, [depth, depth], ["ground", "aerial"], alpha=0.4
        )
        assert by_default == explicit


def test_site_generation_counts_and_bands(tmp_path):
    with criterion("site generation: counts, bands, yaw, depth geometry", 60.0):
        scene, manifest = write_site(SiteConfig(), tmp_path)
        by_mod = {"ground": [], "aerial": [], "satellite": []}
        for view in manifest.views:
            by_mod[view.modality].append(view)
        assert len(by_mod["ground"]) == 120
        assert len(by_mod["aerial"]) == 1080
        assert len(by_mod["satellite"]) == 120

        per_camera = {"center": [], "left": [], "right": []}
        for view in by_mod["aerial"]:
            per_camera[view.id.split("_")[1]].append(view)
        band_ranges = ((0, 60, 700.0, 800.0), (60, 180, 450.0, 550.0), (180, 360, 200.0, 300.0))
        for name, views in per_camera.items():
            assert len(views) == 360
            frames = {int(v.id.rsplit("_", 1)[1]): v for v in views}
            for lo, hi, alt_lo, alt_hi in band_ranges:
                for f in range(lo, hi):
                    assert alt_lo - 1e-9 <= frames[f].altitude_agl <= alt_hi + 1e-9

        for view in manifest.views:
            lo, hi = ALTITUDE_BANDS[view.modality]
            assert lo <= view.altitude_agl <= hi

        aerial = {v.id: v for v in by_mod["aerial"]}
        for frame in (0, 150, 359):
            rc = aerial[f"aerial_center_{frame:04d}"].pose().rotation
            for name, yaw_deg in (("left", -20.0), ("right", 20.0)):
                rs = aerial[f"aerial_{name}_{frame:04d}"].pose().rotation
                expected = rc.compose(rotation_about_z(math.radians(yaw_deg)))
                assert np.max(np.abs(rs.matrix - expected.matrix)) < 1e-9

        flat = HeightfieldScene(extent=400.0, bumps=(), box=None)
        intr = intrinsics_for(32, 32, 10.0)
        nadir = ViewRecord(
            "probe", "satellite", UnitQuaternion.identity(),
            -(nadir_rotation().matrix @ np.array([10.0, -20.0, 1500.0])),
            intr, 1500.0,
        )
        pose = Pose(nadir_rotation(), nadir.translation)
        depth = render_depth(flat, pose, intr)
        assert np.max(np.abs(depth - 1500.0)) < 1e-6

        for view in (by_mod["ground"][0], by_mod["aerial"][0], by_mod["satellite"][0]):
            raster = read_depth_raster(tmp_path / view.depth_path)
            pts, valid = unproject(view.pose(), view.intrinsics, raster)
            gap = pts[..., 2] - scene.height(pts[..., 0], pts[..., 1])
            assert valid.any()
            assert np.max(np.abs(gap[valid])) < 1e-3


def test_similarity_alignment():
    with criterion("similarity alignment: recovery, weights, lower bound", 5.0):
        rng = np.random.default_rng(0)
        src = rng.standard_normal((10, 3))
        true_r = rotation_about_z(math.pi / 2)
        true_t = np.array([1.0, 2.0, 3.0])
        dst = 2.0 * (src @ true_r.matrix.T) + true_t
        got = weighted_similarity_procrustes(src, dst)
        assert abs(got.scale - 2.0) < 1e-9
        assert np.max(np.abs(got.rotation.matrix - true_r.matrix)) < 1e-9
        assert np.max(np.abs(got.translation - true_t)) < 1e-9

        with_outlier = np.vstack([src, [50.0, -70.0, 10.0]])
        dst_outlier = np.vstack([dst, [0.0, 0.0, 0.0]])
        weights = np.append(np.ones(10), 0.0)
        weighted = weighted_similarity_procrustes(with_outlier, dst_outlier, weights)
        assert abs(weighted.scale - got.scale) < 1e-9
        assert np.max(np.abs(weighted.rotation.matrix - got.rotation.matrix)) < 1e-9
        assert np.max(np.abs(weighted.translation - got.translation)) < 1e-9

        noisy_dst = dst + rng.normal(scale=0.3, size=dst.shape)
        fit = weighted_similarity_procrustes(src, noisy_dst)
        best = fit.residual(src, noisy_dst)
        from skybench.geometry import SimilarityTransform

        for _ in range(1000):
            candidate = SimilarityTransform(
                float(rng.uniform(0.5, 4.0)),
                random_rotation(rng),
                rng.standard_normal(3),
            )
            assert candidate.residual(src, noisy_dst) >= best - 1e-12


def test_psnr_fixture():
    with criterion("psnr: constant-difference fixture and infinity", 5.0):
        a = np.zeros((16, 16))
        b = np.full((16, 16), 10.0)
        assert abs(psnr(a, b) - 28.13) <= 0.01
        assert psnr(a, a) == math.inf


def test_cli_end_to_end(tmp_path, capsys):
    with criterion("CLI pipeline: reduced site, deterministic twice", 60.0):
        outputs = []
        for run in ("one", "two"):
            root = tmp_path / run
            code = main(
                ["gen-site", "--site-id", "site", "--ground-n", "10",
                 "--satellite-n", "8", "--band-frames", "2,4,6",
                 "--seed", "11", "--out-dir", str(root)]
            )
            assert code == 0
            capsys.readouterr()
            site = root / "site"

            code = main(
                ["sample", "--manifest", str(site), "--mode", "pvs",
                 "--n", "8", "--tau", "0.5", "--seed", "11"]
            )
            assert code == 0
            sample_out = capsys.readouterr().out

            fwd = root / "fwd"
            code = main(
                ["forward", "--manifest", str(site), "--ids",
                 "ground_0000,aerial_center_0000,satellite_0000",
                 "--seed", "11", "--out-dir", str(fwd)]
            )
            assert code == 0
            capsys.readouterr()

            rep = root / "rep"
            code = main(
                ["eval", "--pred", str(site), "--gt", str(site),
                 "--out-dir", str(rep)]
            )
            assert code == 0
            capsys.readouterr()
            report = json.loads((rep / "report.json").read_text())
            assert report["avg"] == 100.0

            blob = {"sample": sample_out}
            for rel in sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file()):
                blob[str(rel)] = (root / rel).read_bytes()
            outputs.append(blob)

        manifest_views = json.loads(
            (tmp_path / "one" / "site" / "manifest.json").read_text()
        )["views"]
        counts = {}
        for view in manifest_views:
            counts[view["modality"]] = counts.get(view["modality"], 0) + 1
        assert counts == {"ground": 10, "aerial": 36, "satellite": 8}

        assert outputs[0].keys() == outputs[1].keys()
        for key in outputs[0]:
            assert outputs[0][key] == outputs[1][key], f"run mismatch in {key}"
