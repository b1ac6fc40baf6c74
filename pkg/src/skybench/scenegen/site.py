"""Site assembly: one scene, three trajectory families, rendered depth."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError
from .depthrender import render_depth
from .manifest import SiteManifest, ViewRecord, write_depth_raster, write_manifest
from .scene import HeightfieldScene, LandmarkBox
from .trajectories import (
    HelixConfig,
    aerial_helix,
    ground_circle,
    intrinsics_for,
    satellite_grid,
)


@dataclass(frozen=True)
class SiteConfig:
    """Everything needed to generate a site deterministically from a seed."""

    site_id: str = "site_000"
    seed: int = 0
    extent: float = 400.0
    n_bumps: int = 6
    ground_count: int = 120
    ground_radius: float = 60.0
    ground_altitude: float = 5.0
    satellite_count: int = 120
    satellite_altitude: float = 1500.0
    helix: HelixConfig = field(default_factory=HelixConfig)
    image_width: int = 32
    image_height: int = 32
    ground_fov_deg: float = 60.0
    aerial_fov_deg: float = 50.0
    satellite_fov_deg: float = 10.0

    def __post_init__(self):
        if min(self.ground_count, self.satellite_count) < 1:
            raise InputError("view counts must be at least 1")
        if min(self.image_width, self.image_height) < 2:
            raise InputError("image dimensions must be at least 2 pixels")


def depth_relpath(view_id: str) -> str:
    return f"depth/{view_id}.skyd"


def generate_site(config: SiteConfig) -> tuple[HeightfieldScene, SiteManifest]:
    """Build the scene and all view records (depth paths assigned, not rendered)."""
    scene = HeightfieldScene.generate(
        seed=config.seed, extent=config.extent, n_bumps=config.n_bumps, box=LandmarkBox()
    )
    views: list[ViewRecord] = []
    views += ground_circle(
        scene,
        n=config.ground_count,
        radius=config.ground_radius,
        altitude=config.ground_altitude,
        intrinsics=intrinsics_for(config.image_width, config.image_height, config.ground_fov_deg),
    )
    views += aerial_helix(
        scene,
        config=config.helix,
        intrinsics=intrinsics_for(config.image_width, config.image_height, config.aerial_fov_deg),
    )
    views += satellite_grid(
        scene,
        n=config.satellite_count,
        altitude=config.satellite_altitude,
        rng_seed=np.random.SeedSequence([config.seed, 2]),
        intrinsics=intrinsics_for(
            config.image_width, config.image_height, config.satellite_fov_deg
        ),
    )
    views = [v.with_depth_path(depth_relpath(v.id)) for v in views]
    return scene, SiteManifest(
        site_id=config.site_id,
        landmark_center=scene.landmark_center(),
        views=tuple(views),
    )


def write_site(config: SiteConfig, out_dir) -> tuple[HeightfieldScene, SiteManifest]:
    """Generate a site and write manifest plus one depth raster per view."""
    out = Path(out_dir)
    scene, manifest = generate_site(config)
    for view in manifest.views:
        depth = render_depth(scene, view.pose(), view.intrinsics)
        write_depth_raster(out / view.depth_path, depth)
    write_manifest(manifest, out)
    return scene, manifest
