"""Camera trajectory generators for the three modalities.

All cameras use the computer-vision frame (x right, y down, z forward)
and world-to-camera extrinsics. The aerial platform carries three
cameras at fixed yaw offsets; their rotations are the center rotation
right-composed with a world-z rotation, so pitch is preserved while the
viewing azimuth swings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..geometry import (
    CameraIntrinsics,
    Pose,
    Rotation3,
    rotation_about_z,
    rotation_to_quat,
)
from .manifest import ALTITUDE_BANDS, ViewRecord
from .scene import HeightfieldScene

AERIAL_CAMERAS = (("left", -20.0), ("center", 0.0), ("right", 20.0))


def look_at(camera_center, target, up_hint=(0.0, 0.0, 1.0)) -> Rotation3:
    """World-to-camera rotation whose principal axis points at `target`."""
    c = np.asarray(camera_center, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    fwd = t - c
    norm = np.linalg.norm(fwd)
    if norm == 0.0:
        raise InputError("camera center and target coincide")
    z_cam = fwd / norm
    right = np.cross(z_cam, np.asarray(up_hint, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(z_cam, np.array([0.0, 1.0, 0.0]))  # looking along +-z
    x_cam = right / np.linalg.norm(right)
    y_cam = np.cross(z_cam, x_cam)
    return Rotation3(np.stack([x_cam, y_cam, z_cam]))


def nadir_rotation() -> Rotation3:
    """Straight-down camera: world -z maps to the principal axis."""
    return Rotation3(np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]))


def intrinsics_for(width: int, height: int, fov_deg: float) -> CameraIntrinsics:
    """Square-pixel pinhole intrinsics from a horizontal field of view."""
    if not 0.0 < fov_deg < 180.0:
        raise InputError("fov_deg must be in (0, 180)")
    fx = width / (2.0 * math.tan(math.radians(fov_deg) / 2.0))
    return CameraIntrinsics(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)


def _record(
    view_id: str,
    modality: str,
    rotation: Rotation3,
    center: np.ndarray,
    intrinsics: CameraIntrinsics,
    altitude_agl: float,
) -> ViewRecord:
    pose = Pose.from_center(rotation, center)
    return ViewRecord(
        id=view_id,
        modality=modality,
        quat=rotation_to_quat(pose.rotation),
        translation=pose.translation,
        intrinsics=intrinsics,
        altitude_agl=altitude_agl,
        is_real=False,
    )


def ground_circle(
    scene: HeightfieldScene,
    n: int,
    radius: float,
    altitude: float,
    intrinsics: CameraIntrinsics,
    id_prefix: str = "ground",
) -> list[ViewRecord]:
    """Evenly spaced look-at walk around the landmark at a fixed AGL.

    Cameras sit at angles 2*pi*k/n starting from angle 0, each at terrain
    height plus `altitude`, aimed exactly at the landmark center.
    """
    if n < 1:
        raise InputError("ground circle needs at least one view")
    if radius <= 0.0:
        raise InputError("radius must be positive")
    lo, hi = ALTITUDE_BANDS["ground"]
    if not lo <= altitude <= hi:
        raise InputError(f"ground altitude {altitude} outside [{lo}, {hi}]")
    target = scene.landmark_center()
    views = []
    for k in range(n):
        theta = 2.0 * math.pi * k / n
        x = target[0] + radius * math.cos(theta)
        y = target[1] + radius * math.sin(theta)
        center = np.array([x, y, scene.height(x, y) + altitude])
        rot = look_at(center, target)
        views.append(
            _record(f"{id_prefix}_{k:04d}", "ground", rot, center, intrinsics, altitude)
        )
    return views


@dataclass(frozen=True)
class HelixBand:
    start_agl: float
    end_agl: float
    frames: int  # per camera

    def __post_init__(self):
        lo, hi = ALTITUDE_BANDS["aerial"]
        for a in (self.start_agl, self.end_agl):
            if not lo <= a <= hi:
                raise InputError(f"aerial band altitude {a} outside [{lo}, {hi}]")
        if self.frames < 1:
            raise InputError("band needs at least one frame")


@dataclass(frozen=True)
class HelixConfig:
    """Descending three-band helix: 60/120/180 frames per band per camera."""

    bands: tuple[HelixBand, ...] = (
        HelixBand(800.0, 700.0, 60),
        HelixBand(550.0, 450.0, 120),
        HelixBand(300.0, 200.0, 180),
    )
    turns_per_band: float = 2.0
    radius_start: float = 150.0
    radius_end: float = 60.0

    def __post_init__(self):
        if not self.bands:
            raise InputError("helix needs at least one band")
        if min(self.radius_start, self.radius_end) <= 0.0:
            raise InputError("helix radii must be positive")

    def frames_per_camera(self) -> int:
        return sum(b.frames for b in self.bands)


def aerial_helix(
    scene: HeightfieldScene,
    config: HelixConfig,
    intrinsics: CameraIntrinsics,
    id_prefix: str = "aerial",
) -> list[ViewRecord]:
    """Triple-camera helix tapering toward the landmark.

    Emits 3 views per platform position (left/center/right at -20/0/+20
    degrees of yaw). The center camera aims at the landmark; side cameras
    are the center rotation composed with a world-z yaw rotation.
    """
    target = scene.landmark_center()
    total = config.frames_per_camera()
    views = []
    global_frame = 0
    angle = 0.0
    for band in config.bands:
        for k in range(band.frames):
            u_band = k / (band.frames - 1) if band.frames > 1 else 0.0
            agl = band.start_agl + (band.end_agl - band.start_agl) * u_band
            u_total = global_frame / (total - 1) if total > 1 else 0.0
            radius = config.radius_start + (config.radius_end - config.radius_start) * u_total
            theta = angle + 2.0 * math.pi * config.turns_per_band * (k / band.frames)
            x = target[0] + radius * math.cos(theta)
            y = target[1] + radius * math.sin(theta)
            center = np.array([x, y, scene.height(x, y) + agl])
            rot_center = look_at(center, target)
            for cam_name, yaw_deg in AERIAL_CAMERAS:
                rot = rot_center.compose(rotation_about_z(math.radians(yaw_deg)))
                views.append(
                    _record(
                        f"{id_prefix}_{cam_name}_{global_frame:04d}",
                        "aerial",
                        rot,
                        center,
                        intrinsics,
                        agl,
                    )
                )
            global_frame += 1
        angle += 2.0 * math.pi * config.turns_per_band
    return views


def satellite_grid(
    scene: HeightfieldScene,
    n: int,
    altitude: float,
    rng_seed,
    intrinsics: CameraIntrinsics,
    id_prefix: str = "satellite",
) -> list[ViewRecord]:
    """Nadir-looking cameras on a jittered grid covering the scene extent.

    Grid positions are jittered uniformly within half a grid cell;
    orientations stay exactly nadir. Jittered positions are clamped to
    the scene extent.
    """
    if n < 1:
        raise InputError("satellite grid needs at least one view")
    lo, hi = ALTITUDE_BANDS["satellite"]
    if not lo <= altitude <= hi:
        raise InputError(f"satellite altitude {altitude} outside [{lo}, {hi}]")
    rng = np.random.default_rng(rng_seed)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    cell_x = scene.extent / cols
    cell_y = scene.extent / rows
    half = scene.extent / 2.0
    rot = nadir_rotation()
    views = []
    idx = 0
    for r in range(rows):
        for c in range(cols):
            if idx >= n:
                break
            x = -half + (c + 0.5) * cell_x + rng.uniform(-0.5, 0.5) * cell_x
            y = -half + (r + 0.5) * cell_y + rng.uniform(-0.5, 0.5) * cell_y
            x = float(np.clip(x, -half, half))
            y = float(np.clip(y, -half, half))
            center = np.array([x, y, scene.height(x, y) + altitude])
            views.append(
                _record(f"{id_prefix}_{idx:04d}", "satellite", rot, center, intrinsics, altitude)
            )
            idx += 1
    return views
