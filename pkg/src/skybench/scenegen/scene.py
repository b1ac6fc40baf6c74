"""Analytic heightfield terrain: base plane, Gaussian bumps, one landmark box."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError


@dataclass(frozen=True)
class GaussianBump:
    x: float
    y: float
    amplitude: float
    sigma: float

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise InputError("bump amplitude must be non-negative")
        if self.sigma <= 0.0:
            raise InputError("bump sigma must be positive")


@dataclass(frozen=True)
class LandmarkBox:
    """Axis-aligned box at the origin whose edges ramp linearly over edge_ramp.

    The ramp keeps the heightfield single-valued and Lipschitz, so depth
    rays near the silhouette still land on the surface graph instead of a
    vertical discontinuity.
    """

    width: float = 30.0
    depth: float = 30.0
    height: float = 25.0
    edge_ramp: float = 1.0

    def __post_init__(self):
        if min(self.width, self.depth, self.height) <= 0.0:
            raise InputError("box dimensions must be positive")
        if not 0.0 < self.edge_ramp <= min(self.width, self.depth) / 2.0:
            raise InputError("edge_ramp must be positive and at most half the footprint")


@dataclass(frozen=True)
class HeightfieldScene:
    """Deterministic terrain over a square domain centered on the origin.

    height(x, y) = base_height + sum of Gaussian bumps + landmark box profile.
    Heights are finite and never below base_height.
    """

    extent: float
    base_height: float = 0.0
    bumps: tuple[GaussianBump, ...] = ()
    box: LandmarkBox | None = LandmarkBox()

    def __post_init__(self):
        if self.extent <= 0.0:
            raise InputError("extent must be positive")
        if self.base_height < 0.0:
            raise InputError("base_height must be non-negative")

    @staticmethod
    def generate(
        seed: int,
        extent: float = 400.0,
        n_bumps: int = 6,
        box: LandmarkBox | None = LandmarkBox(),
    ) -> "HeightfieldScene":
        """Seeded random scene: bump placement is the only random part."""
        rng = np.random.default_rng(seed)
        span = 0.35 * extent
        bumps = tuple(
            GaussianBump(
                x=float(rng.uniform(-span, span)),
                y=float(rng.uniform(-span, span)),
                amplitude=float(rng.uniform(2.0, 10.0)),
                sigma=float(rng.uniform(15.0, 40.0)),
            )
            for _ in range(n_bumps)
        )
        return HeightfieldScene(extent=extent, bumps=bumps, box=box)

    def height(self, x, y):
        """Terrain height at (x, y); broadcasts over arrays."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        h = np.full(np.broadcast_shapes(x.shape, y.shape), self.base_height)
        for b in self.bumps:
            d2 = (x - b.x) ** 2 + (y - b.y) ** 2
            h = h + b.amplitude * np.exp(-d2 / (2.0 * b.sigma * b.sigma))
        if self.box is not None:
            bx = self.box
            px = np.clip((bx.width / 2.0 - np.abs(x)) / bx.edge_ramp, 0.0, 1.0)
            py = np.clip((bx.depth / 2.0 - np.abs(y)) / bx.edge_ramp, 0.0, 1.0)
            h = h + bx.height * np.minimum(px, py)
        return h if h.ndim else float(h)

    def max_height(self) -> float:
        """Upper bound on terrain height (sum of component maxima)."""
        top = self.base_height + sum(b.amplitude for b in self.bumps)
        if self.box is not None:
            top += self.box.height
        return top

    def min_feature_size(self) -> float:
        """Smallest horizontal scale a ray march must not step over."""
        sizes = [b.sigma for b in self.bumps]
        if self.box is not None:
            sizes += [self.box.width / 2.0, self.box.depth / 2.0]
        return min(sizes) if sizes else math.inf

    def landmark_center(self) -> np.ndarray:
        """World point the site's cameras aim at."""
        z = self.base_height + (self.box.height / 2.0 if self.box is not None else 0.0)
        return np.array([0.0, 0.0, z])
