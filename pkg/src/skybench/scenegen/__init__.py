"""Synthetic cross-view site generation."""

from .depthrender import (
    OrthoRaster,
    camera_rays,
    ortho_rectify,
    render_depth,
    shaded_render,
    unproject,
)
from .manifest import (
    ALTITUDE_BANDS,
    MODALITIES,
    SiteManifest,
    ViewRecord,
    read_depth_raster,
    read_manifest,
    write_depth_raster,
    write_manifest,
)
from .scene import GaussianBump, HeightfieldScene, LandmarkBox
from .site import SiteConfig, depth_relpath, generate_site, write_site
from .trajectories import (
    AERIAL_CAMERAS,
    HelixBand,
    HelixConfig,
    aerial_helix,
    ground_circle,
    intrinsics_for,
    look_at,
    nadir_rotation,
    satellite_grid,
)

__all__ = [
    "ALTITUDE_BANDS",
    "AERIAL_CAMERAS",
    "GaussianBump",
    "HeightfieldScene",
    "HelixBand",
    "HelixConfig",
    "LandmarkBox",
    "MODALITIES",
    "OrthoRaster",
    "SiteConfig",
    "SiteManifest",
    "ViewRecord",
    "aerial_helix",
    "camera_rays",
    "depth_relpath",
    "generate_site",
    "ground_circle",
    "intrinsics_for",
    "look_at",
    "nadir_rotation",
    "ortho_rectify",
    "read_depth_raster",
    "read_manifest",
    "render_depth",
    "satellite_grid",
    "shaded_render",
    "unproject",
    "write_depth_raster",
    "write_manifest",
    "write_site",
]
