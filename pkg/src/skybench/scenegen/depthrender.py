"""Depth rendering against the analytic heightfield, and ortho resampling.

Depth is z-depth: the camera-frame z coordinate of the surface hit, so a
nadir camera over flat ground reads a constant equal to its altitude.
Rays are parameterized by that coordinate directly: P(s) = C + s * w,
where w = R^T (x~, y~, 1) for the pixel's normalized image coordinates.

Rendering marches f(s) = P_z(s) - height(P_xy(s)) to a sign change and
then bisects. Steps are capped horizontally at half the smallest terrain
feature so a march cannot step across a bump or the landmark box, and
rays starting above the terrain's maximum height jump straight down to
that ceiling first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError, InvalidCamera
from ..geometry import CameraIntrinsics, Pose
from .manifest import ViewRecord
from .scene import HeightfieldScene

_MIN_STEP = 1e-2
_BISECT_ITERS = 60


def camera_rays(pose: Pose, intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel world ray directions scaled per unit z-depth, plus the center.

    Returns (dirs, center) with dirs shaped (H*W, 3), row-major over pixels.
    """
    intr = intrinsics
    u = (np.arange(intr.width) + 0.5 - intr.cx) / intr.fx
    v = (np.arange(intr.height) + 0.5 - intr.cy) / intr.fy
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1).reshape(-1, 3)
    dirs = d_cam @ pose.rotation.matrix  # rows: R^T @ d
    return dirs, pose.camera_center()


def _surface_gap(scene: HeightfieldScene, center, dirs, s) -> np.ndarray:
    p = center[None, :] + s[:, None] * dirs
    return p[:, 2] - scene.height(p[:, 0], p[:, 1])


def render_depth(
    scene: HeightfieldScene,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    max_iters: int = 4000,
) -> np.ndarray:
    """Render a (H, W) float64 z-depth map; invalid pixels are 0.

    Invalid means the ray leaves the scene extent, rises above the
    terrain's maximum height while pointing up, or never intersects.
    The persisted raster format quantizes to f32; the in-memory result
    keeps f64 so geometric checks are not limited by storage precision.
    """
    dirs, center = camera_rays(pose, intrinsics)
    n = dirs.shape[0]
    if center[2] <= scene.height(center[0], center[1]):
        raise InvalidCamera("camera center is on or below the terrain")
    ceiling = scene.max_height() + 1e-9
    half = scene.extent / 2.0
    wz = dirs[:, 2]

    # Stop parameter per ray: extent exit in x/y, base-plane floor in z.
    s_stop = np.full(n, np.inf)
    for c, w in ((center[0], dirs[:, 0]), (center[1], dirs[:, 1])):
        with np.errstate(divide="ignore"):
            exit_s = np.where(
                w > 0, (half - c) / np.where(w > 0, w, 1.0),
                np.where(w < 0, (-half - c) / np.where(w < 0, w, 1.0), np.inf),
            )
        s_stop = np.minimum(s_stop, exit_s)
    with np.errstate(divide="ignore"):
        floor_s = np.where(wz < 0, (scene.base_height - center[2]) / np.where(wz < 0, wz, 1.0), np.inf)
    s_stop = np.minimum(s_stop, floor_s)

    # Rays above the ceiling jump straight to it; non-descending ones miss.
    s = np.zeros(n)
    alive = s_stop > 0
    if center[2] > ceiling:
        desc = wz < 0
        s = np.where(desc, (ceiling - center[2]) / np.where(desc, wz, 1.0), 0.0)
        alive &= desc
        alive &= s < s_stop

    # Horizontal step cap: never stride across the narrowest feature.
    feat = scene.min_feature_size()
    wxy = np.hypot(dirs[:, 0], dirs[:, 1])
    if np.isfinite(feat):
        with np.errstate(divide="ignore"):
            hcap = np.where(wxy > 1e-12, (feat / 2.0) / np.where(wxy > 1e-12, wxy, 1.0), np.inf)
    else:
        hcap = np.full(n, np.inf)

    gap = np.zeros(n)
    idx0 = np.nonzero(alive)[0]
    gap[idx0] = _surface_gap(scene, center, dirs[idx0], s[idx0])
    # A camera validated above terrain and an entry at the ceiling both
    # start with positive gap; anything else is numerically at the surface.
    started_inside = idx0[gap[idx0] <= 0.0]
    alive[started_inside] = False

    s_lo = np.zeros(n)
    s_hi = np.zeros(n)
    bracketed = np.zeros(n, dtype=bool)
    s_lo[started_inside] = s[started_inside]
    s_hi[started_inside] = s[started_inside]
    bracketed[started_inside] = True

    for _ in range(max_iters):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        step = np.clip(0.5 * gap[idx], _MIN_STEP, hcap[idx])
        s_new = s[idx] + step
        at_stop = s_new >= s_stop[idx]
        s_new = np.where(at_stop, s_stop[idx], s_new)
        p = center[None, :] + s_new[:, None] * dirs[idx]
        gap_new = p[:, 2] - scene.height(p[:, 0], p[:, 1])
        crossed = gap_new <= 0.0
        ci = idx[crossed]
        s_lo[ci] = s[ci]
        s_hi[ci] = s_new[crossed]
        bracketed[ci] = True
        risen = (p[:, 2] > ceiling) & (dirs[idx][:, 2] >= 0.0)
        alive[idx[crossed | at_stop | risen]] = False
        s[idx] = s_new
        gap[idx] = gap_new

    bi = np.nonzero(bracketed)[0]
    lo, hi = s_lo[bi], s_hi[bi]
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        below = _surface_gap(scene, center, dirs[bi], mid) <= 0.0
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    depth = np.zeros(n)
    depth[bi] = hi
    return depth.reshape(intrinsics.height, intrinsics.width)


def unproject(
    pose: Pose, intrinsics: CameraIntrinsics, depth: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """World points (H, W, 3) for a z-depth map, with a validity mask."""
    d = np.asarray(depth, dtype=np.float64)
    if d.shape != (intrinsics.height, intrinsics.width):
        raise InputError(
            f"depth shape {d.shape} does not match intrinsics "
            f"({intrinsics.height}, {intrinsics.width})"
        )
    dirs, center = camera_rays(pose, intrinsics)
    pts = center[None, :] + d.reshape(-1, 1) * dirs
    return pts.reshape(intrinsics.height, intrinsics.width, 3), d > 0.0


@dataclass(frozen=True, eq=False)
class OrthoRaster:
    """North-up orthorectified sampling of one view.

    values[i, j] is the terrain height observed through the view at world
    position (origin_x + (j + 0.5) * gsd, origin_y - (i + 0.5) * gsd);
    origin is the top-left (west, north) corner. pixel_uv holds the
    continuous source-pixel coordinates each cell sampled (NaN when the
    cell did not project into the image).
    """

    values: np.ndarray
    valid: np.ndarray
    origin_x: float
    origin_y: float
    gsd: float
    pixel_uv: np.ndarray


def ortho_rectify(
    scene: HeightfieldScene,
    view: ViewRecord,
    depth: np.ndarray,
    gsd: float,
) -> OrthoRaster:
    """Resample a perspective view onto a ground-aligned grid.

    Cells are valid when their terrain point projects inside the image,
    samples a valid depth, and is not occluded (its z-depth agrees with
    the depth map to half a meter plus 1%).

    Args:
        scene: terrain the view observed.
        view: camera record (pose + intrinsics).
        depth: the view's rendered z-depth map.
        gsd: output ground sample distance in meters per pixel.
    """
    if gsd <= 0.0:
        raise InputError("gsd must be positive")
    intr = view.intrinsics
    d = np.asarray(depth, dtype=np.float64)
    if d.shape != (intr.height, intr.width):
        raise InputError("depth raster does not match the view's intrinsics")
    pose = view.pose()
    rot = pose.rotation.matrix
    center = pose.camera_center()

    # Footprint: corner rays onto the base plane, clipped to the extent.
    dirs, _ = camera_rays(pose, intr)
    corners = dirs.reshape(intr.height, intr.width, 3)[[0, 0, -1, -1], [0, -1, 0, -1]]
    half = scene.extent / 2.0
    xs, ys = [], []
    for w in corners:
        if w[2] < 0.0:
            s_plane = (scene.base_height - center[2]) / w[2]
            xs.append(center[0] + s_plane * w[0])
            ys.append(center[1] + s_plane * w[1])
    if not xs:
        raise InvalidCamera("view does not face the terrain")
    x0, x1 = max(min(xs), -half), min(max(xs), half)
    y0, y1 = max(min(ys), -half), min(max(ys), half)
    if x1 <= x0 or y1 <= y0:
        raise InvalidCamera("view footprint does not overlap the scene extent")

    # Snap cells to the global gsd lattice (centers at (k + 0.5) * gsd) so
    # rasters from different views are co-registered cell-for-cell.
    kx0 = math.ceil(x0 / gsd - 0.5)
    kx1 = math.floor(x1 / gsd - 0.5)
    ky0 = math.ceil(y0 / gsd - 0.5)
    ky1 = math.floor(y1 / gsd - 0.5)
    if kx1 < kx0 or ky1 < ky0:
        raise InputError("gsd too coarse for the view footprint")
    n_cols = kx1 - kx0 + 1
    n_rows = ky1 - ky0 + 1
    cell_x = (np.arange(kx0, kx1 + 1) + 0.5) * gsd
    cell_y = (np.arange(ky1, ky0 - 1, -1) + 0.5) * gsd  # north-up: row 0 at max y
    x0 = kx0 * gsd
    y1 = (ky1 + 1) * gsd
    gx, gy = np.meshgrid(cell_x, cell_y)
    gz = scene.height(gx, gy)
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)

    cam = (pts - center) @ rot.T
    z = cam[:, 2]
    ok = z > 1e-9
    u = np.full(z.shape, np.nan)
    v = np.full(z.shape, np.nan)
    u[ok] = intr.fx * cam[ok, 0] / z[ok] + intr.cx
    v[ok] = intr.fy * cam[ok, 1] / z[ok] + intr.cy
    inside = ok & (u >= 0.5) & (u <= intr.width - 0.5) & (v >= 0.5) & (v <= intr.height - 0.5)

    values = np.zeros(z.shape)
    valid = np.zeros(z.shape, dtype=bool)
    if inside.any():
        ui = u[inside] - 0.5
        vi = v[inside] - 0.5
        j0 = np.clip(np.floor(ui).astype(int), 0, intr.width - 2)
        i0 = np.clip(np.floor(vi).astype(int), 0, intr.height - 2)
        fu = ui - j0
        fv = vi - i0
        d00 = d[i0, j0]
        d01 = d[i0, j0 + 1]
        d10 = d[i0 + 1, j0]
        d11 = d[i0 + 1, j0 + 1]
        corners_ok = (d00 > 0) & (d01 > 0) & (d10 > 0) & (d11 > 0)
        d_s = (
            d00 * (1 - fu) * (1 - fv)
            + d01 * fu * (1 - fv)
            + d10 * (1 - fu) * fv
            + d11 * fu * fv
        )
        visible = corners_ok & (z[inside] <= d_s + 0.5 + 0.01 * z[inside])
        # Height seen through the view: unproject the sampled depth along
        # the exact ray of the continuous pixel coordinate.
        wz_uv = (
            rot.T
            @ np.stack(
                [(u[inside] - intr.cx) / intr.fx, (v[inside] - intr.cy) / intr.fy, np.ones(ui.shape)]
            )
        )[2]
        height_seen = center[2] + d_s * wz_uv
        sel = np.nonzero(inside)[0]
        values[sel[visible]] = height_seen[visible]
        valid[sel[visible]] = True

    uv = np.stack([u, v], axis=-1)
    uv[~inside] = np.nan
    return OrthoRaster(
        values=values.reshape(n_rows, n_cols),
        valid=valid.reshape(n_rows, n_cols),
        origin_x=float(x0),
        origin_y=float(y1),
        gsd=float(gsd),
        pixel_uv=uv.reshape(n_rows, n_cols, 2),
    )


def shaded_render(
    scene: HeightfieldScene,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    depth: np.ndarray | None = None,
    light=(0.4, 0.2, 1.0),
) -> np.ndarray:
    """Simple grayscale Lambertian shading of the terrain, uint8 (H, W).

    Only used as optional imagery (e.g. quality metrics); geometry tests
    run on depth. Invalid pixels render black.
    """
    if depth is None:
        depth = render_depth(scene, pose, intrinsics)
    pts, valid = unproject(pose, intrinsics, depth)
    x, y = pts[..., 0], pts[..., 1]
    eps = 0.25
    gx = (scene.height(x + eps, y) - scene.height(x - eps, y)) / (2 * eps)
    gy = (scene.height(x, y + eps) - scene.height(x, y - eps)) / (2 * eps)
    normal = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)
    normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
    lv = np.asarray(light, dtype=np.float64)
    lv /= np.linalg.norm(lv)
    shade = np.clip(normal @ lv, 0.0, 1.0)
    shade[~valid] = 0.0
    return (255.0 * shade).astype(np.uint8)
