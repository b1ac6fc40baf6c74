"""Training-time view samplers.

Two schedules driven by a progress fraction tau in [0, 1]:

* distance curriculum: rank candidate views by cached pose distance from
  an anchor and pick at equal stride from a prefix that grows with tau,
  so early batches stay near the anchor and late batches span the site;
* modality schedule: shift the batch composition from aerial-heavy at
  tau = 0 to ground/satellite-only at tau = 1.

Distances come from a precomputed cache built entry-by-entry with the
scalar pose metric, so cached values compare equal to direct calls.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InputError, InsufficientViews, InvalidBatch
from .geometry import pair_distance
from .scenegen import SiteManifest

CACHE_MAGIC = b"SKYC"

_MODALITY_ORDER = ("ground", "aerial", "satellite")


@dataclass(frozen=True)
class CurriculumProgress:
    """Fraction of the training schedule elapsed."""

    tau: float

    def __post_init__(self):
        if not (isinstance(self.tau, (int, float)) and 0.0 <= self.tau <= 1.0):
            raise InputError(f"tau must be in [0, 1], got {self.tau!r}")


@dataclass(frozen=True, eq=False)
class DistanceCache:
    """Symmetric pairwise pose distances, ids aligned to manifest order."""

    ids: tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        m = len(self.ids)
        mat = np.asarray(self.d, dtype=np.float64)
        if mat.shape != (m, m):
            raise InputError(f"distance matrix shape {mat.shape} does not match {m} ids")
        if len(set(self.ids)) != m:
            raise InputError("cache ids must be unique")
        if not np.array_equal(mat, mat.T):
            raise InputError("distance matrix must be symmetric")
        if np.any(np.diag(mat) != 0.0):
            raise InputError("distance matrix diagonal must be zero")
        if np.any(mat < 0.0) or not np.all(np.isfinite(mat)):
            raise InputError("distances must be finite and non-negative")
        mat.flags.writeable = False
        object.__setattr__(self, "d", mat)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def size(self) -> int:
        return len(self.ids)

    def index_of(self, view_id: str) -> int:
        try:
            return self.ids.index(view_id)
        except ValueError:
            raise InputError(f"unknown view id {view_id!r}") from None


def build_distance_cache(views, lambda_t: float = 0.5) -> DistanceCache:
    """Pairwise pose distances for a view list, in list order.

    Entries are computed one pair at a time with the scalar metric so the
    cache is bit-identical to direct recomputation.
    """
    views = list(views)
    if len(views) < 2:
        raise InputError("distance cache needs at least 2 views")
    poses = [v.pose() for v in views]
    m = len(views)
    d = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            val = pair_distance(poses[i], poses[j], lambda_t)
            d[i, j] = val
            d[j, i] = val
    return DistanceCache(ids=tuple(v.id for v in views), d=d)


def save_distance_cache(cache: DistanceCache, path) -> Path:
    """Persist the matrix: magic, u32 count, row-major little-endian f32."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", cache.size))
        fh.write(cache.d.astype("<f4").tobytes(order="C"))
    return path


def load_distance_cache(path, ids=None) -> DistanceCache:
    """Load a persisted cache; ids default to stringified indices."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != CACHE_MAGIC:
        raise DataError(f"{path}: not a distance cache (bad magic)")
    (m,) = struct.unpack("<I", blob[4:8])
    expected = 8 + 4 * m * m
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes for {m} views, got {len(blob)}")
    mat = np.frombuffer(blob[8:], dtype="<f4").reshape(m, m).astype(np.float64)
    if ids is None:
        ids = tuple(str(i) for i in range(m))
    elif len(ids) != m:
        raise InputError(f"{len(ids)} ids for a {m}-view cache")
    return DistanceCache(ids=tuple(ids), d=mat)


def _stride_select(dist_row, candidates, n, progress: CurriculumProgress):
    """Pick n of the candidates at equal stride within a growing prefix.

    Candidates are ranked by dist_row ascending (ties by index). The
    eligible prefix holds the nearest P(tau) of them, interpolating from
    the n nearest at tau = 0 to everyone at tau = 1; picks sit at rounded
    equal offsets across that prefix, always starting at the nearest.
    """
    ordered = sorted(candidates, key=lambda i: (dist_row[i], i))
    avail = len(ordered)
    if n > avail:
        raise InsufficientViews(f"asked for {n} views, only {avail} candidates")
    if n < 1:
        raise InputError("sample count must be at least 1")
    # Prefix length: avail * (p0 + (1 - p0) * tau) with p0 = n / avail,
    # computed as n + (avail - n) * tau so the endpoints are exact.
    prefix = math.ceil(n + (avail - n) * progress.tau)
    prefix = max(n, min(avail, prefix))
    if n == 1:
        return [ordered[0]]
    return [ordered[round(k * (prefix - 1) / (n - 1))] for k in range(n)]


def curriculum_sample(
    anchor: int, cache: DistanceCache, n: int, progress: CurriculumProgress
) -> list[int]:
    """Distance-curriculum draw: n view indices around an anchor view.

    Deterministic: the same (anchor, cache, n, tau) always returns the
    same indices, and the nearest view is always included.
    """
    m = cache.size
    if not 0 <= anchor < m:
        raise InputError(f"anchor index {anchor} out of range for {m} views")
    candidates = [i for i in range(m) if i != anchor]
    return _stride_select(cache.d[anchor], candidates, n, progress)


@dataclass(frozen=True)
class ModalityCounts:
    """Per-modality view counts for one batch."""

    n_a: int
    n_g: int
    n_s: int

    def __post_init__(self):
        if self.n_a < 0 or self.n_g < 1 or self.n_s < 1:
            raise InputError(
                "counts need n_a >= 0 and at least one ground and one satellite view"
            )

    @property
    def total(self) -> int:
        return self.n_a + self.n_g + self.n_s

    def for_modality(self, modality: str) -> int:
        return {"ground": self.n_g, "aerial": self.n_a, "satellite": self.n_s}[modality]


def modality_counts(n_total: int, progress: CurriculumProgress) -> ModalityCounts:
    """Modality schedule: aerial-heavy early, ground/satellite-only late.

    n_a = round((1 - tau) * (n_total - 2)); the leftover splits between
    ground and satellite, ground taking the extra view when it is odd.
    Both stay at least 1 so every batch is multi-modal.
    """
    if n_total < 3:
        raise InvalidBatch(f"batch needs at least 3 views, got {n_total}")
    n_a = round((1.0 - progress.tau) * (n_total - 2))
    leftover = n_total - n_a - 2
    n_g = 1 + math.ceil(leftover / 2)
    n_s = 1 + leftover // 2
    return ModalityCounts(n_a=n_a, n_g=n_g, n_s=n_s)


def sample_by_modality(manifest: SiteManifest, counts: ModalityCounts, rng_seed) -> list[str]:
    """Uniform without-replacement draw of counts per modality.

    Returns ids in ground, aerial, satellite order; deterministic for a
    seed.
    """
    rng = np.random.default_rng(rng_seed)
    picked: list[str] = []
    for modality in _MODALITY_ORDER:
        want = counts.for_modality(modality)
        pool = manifest.by_modality(modality)
        if want > len(pool):
            raise InsufficientViews(
                f"{modality}: batch needs {want} views, site has {len(pool)}"
            )
        if want:
            chosen = rng.choice(len(pool), size=want, replace=False)
            picked.extend(pool[int(i)].id for i in chosen)
    return picked


def composed_sample(
    manifest: SiteManifest,
    cache: DistanceCache,
    anchor_id: str,
    n_total: int,
    progress: CurriculumProgress,
) -> list[str]:
    """Modality schedule composed with the distance curriculum.

    Splits the batch with modality_counts, then fills each modality by
    distance-curriculum selection anchored at that modality's view
    nearest the global anchor (the anchor itself for its own modality).
    Fully deterministic; the anchor is not part of the result.
    """
    expected_ids = tuple(v.id for v in manifest.views)
    if cache.ids != expected_ids:
        raise InputError("distance cache does not match the manifest's view order")
    anchor = cache.index_of(anchor_id)
    counts = modality_counts(n_total, progress)
    modality_of = [v.modality for v in manifest.views]
    picked: list[str] = []
    for modality in _MODALITY_ORDER:
        want = counts.for_modality(modality)
        if want == 0:
            continue
        subset = [i for i in range(cache.size) if modality_of[i] == modality]
        if not subset:
            raise InsufficientViews(f"{modality}: site has no views")
        if anchor in subset:
            local_anchor = anchor
        else:
            local_anchor = min(subset, key=lambda i: (cache.d[anchor, i], i))
        candidates = [i for i in subset if i != local_anchor]
        if want > len(candidates):
            raise InsufficientViews(
                f"{modality}: batch needs {want} views beyond the anchor, "
                f"site has {len(candidates)}"
            )
        picked.extend(
            cache.ids[i]
            for i in _stride_select(cache.d[local_anchor], candidates, want, progress)
        )
    return picked
