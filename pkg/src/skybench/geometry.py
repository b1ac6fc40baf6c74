"""Rotations, camera poses, pose distances, and similarity alignment.

Conventions used across the package:
  * rotations are world-to-camera; for a camera with orientation R and
    center C the extrinsic translation is t = -R @ C,
  * quaternions are scalar-first (w, x, y, z) with canonical sign w >= 0,
  * angles are radians unless a name says _deg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, InputError, InvalidShape

_ORTHO_TOL = 1e-9
_QUAT_NORM_TOL = 1e-6


def _frozen_array(values, shape, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise InvalidShape(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Rotation3:
    """A proper rotation matrix, validated at construction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.matrix, (3, 3), "rotation matrix")
        # Orthonormality and det +1 are hard invariants, not fixed up silently.
        if np.max(np.abs(m.T @ m - np.eye(3))) > _ORTHO_TOL:
            raise InputError("rotation matrix columns are not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > _ORTHO_TOL:
            raise InputError("rotation matrix determinant must be +1")
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def identity() -> "Rotation3":
        return Rotation3(np.eye(3))

    def compose(self, other: "Rotation3") -> "Rotation3":
        """Return self @ other (apply `other` first)."""
        return Rotation3(self.matrix @ other.matrix)

    def inverse(self) -> "Rotation3":
        return Rotation3(self.matrix.T)

    def apply(self, vec) -> np.ndarray:
        return self.matrix @ np.asarray(vec, dtype=np.float64)


def rotation_about_axis(axis, angle: float) -> Rotation3:
    """Rodrigues rotation about an arbitrary axis.

    Args:
        axis: 3-vector, any nonzero length.
        angle: rotation angle in radians (right-handed).
    """
    a = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        raise InputError("rotation axis must be nonzero")
    x, y, z = a / norm
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    m = np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)
    return Rotation3(m)


def rotation_about_z(angle: float) -> Rotation3:
    return rotation_about_axis((0.0, 0.0, 1.0), angle)


@dataclass(frozen=True, eq=False)
class UnitQuaternion:
    """Scalar-first unit quaternion, sign-canonicalized at construction.

    Canonical sign: w >= 0; if w == 0 the first nonzero of (x, y, z) is
    positive. q and -q encode the same rotation, so flipping is safe.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        comps = [float(self.w), float(self.x), float(self.y), float(self.z)]
        if not all(math.isfinite(c) for c in comps):
            raise InputError("quaternion components must be finite")
        norm = math.sqrt(sum(c * c for c in comps))
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise InputError(f"quaternion norm {norm!r} deviates from 1 beyond {_QUAT_NORM_TOL}")
        flip = False
        if comps[0] < 0.0:
            flip = True
        elif comps[0] == 0.0:
            for c in comps[1:]:
                if c != 0.0:
                    flip = c < 0.0
                    break
        if flip:
            comps = [-c for c in comps]
        object.__setattr__(self, "w", comps[0])
        object.__setattr__(self, "x", comps[1])
        object.__setattr__(self, "y", comps[2])
        object.__setattr__(self, "z", comps[3])

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_components(w: float, x: float, y: float, z: float) -> "UnitQuaternion":
        """Normalize an arbitrary nonzero 4-vector into a canonical unit quaternion."""
        norm = math.sqrt(w * w + x * x + y * y + z * z)
        if norm == 0.0 or not math.isfinite(norm):
            raise InputError("cannot normalize a zero or non-finite quaternion")
        return UnitQuaternion(w / norm, x / norm, y / norm, z / norm)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])


def quat_to_rotation(q: UnitQuaternion) -> Rotation3:
    """Convert a unit quaternion to its rotation matrix."""
    norm = math.sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z)
    w, x, y, z = q.w / norm, q.x / norm, q.y / norm, q.z / norm
    return Rotation3(
        np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
    )


def rotation_to_quat(r: Rotation3) -> UnitQuaternion:
    """Convert a rotation matrix to a canonical unit quaternion.

    Branches on the largest diagonal term for numerical stability; the
    round trip with quat_to_rotation reproduces the matrix to 1e-9.
    """
    m = r.matrix
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] >= m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return UnitQuaternion.from_components(w, x, y, z)


@dataclass(frozen=True, eq=False)
class Pose:
    """World-to-camera pose: x_cam = rotation @ x_world + translation."""

    rotation: Rotation3
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "translation", _frozen_array(self.translation, (3,), "translation")
        )

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation3.identity(), np.zeros(3))

    @staticmethod
    def from_center(rotation: Rotation3, center) -> "Pose":
        """Build a pose from an orientation and a camera center in world coordinates."""
        c = np.asarray(center, dtype=np.float64)
        return Pose(rotation, -(rotation.matrix @ c))

    def camera_center(self) -> np.ndarray:
        return -(self.rotation.matrix.T @ self.translation)

    def principal_axis(self) -> np.ndarray:
        """Unit viewing direction in world coordinates (camera +z)."""
        return self.rotation.matrix[2].copy()


def rotation_geodesic_distance(r1: Rotation3, r2: Rotation3) -> float:
    """Normalized geodesic distance in [0, 1] between two rotations.

    The angle is evaluated as atan2(|skew part|, (trace - 1)/2) of the
    relative rotation rather than arccos of the trace alone: arccos
    loses half its digits near 0 and pi, which would make the distance
    between nearly identical rotations wobble at the 1e-6 level under
    exact-in-theory re-parameterizations. atan2 keeps both endpoints
    accurate to machine precision. Identical matrices short-circuit to
    exactly 0.
    """
    if np.array_equal(r1.matrix, r2.matrix):
        return 0.0
    m = r1.matrix.T @ r2.matrix
    cos_term = (float(np.trace(m)) - 1.0) / 2.0
    vee = 0.5 * np.array(
        [m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]]
    )
    sin_term = float(np.linalg.norm(vee))
    return math.atan2(sin_term, cos_term) / math.pi


def pair_distance(p1: Pose, p2: Pose, lambda_t: float = 0.5) -> float:
    """Rotation geodesic plus lambda_t-weighted translation distance."""
    if lambda_t < 0.0 or not math.isfinite(lambda_t):
        raise InputError("lambda_t must be finite and non-negative")
    d_rot = rotation_geodesic_distance(p1.rotation, p2.rotation)
    d_trans = float(np.linalg.norm(p1.translation - p2.translation))
    return d_rot + lambda_t * d_trans


def relative_pose(pose_i: Pose, pose_j: Pose) -> Pose:
    """Pose of camera j expressed in camera i's frame."""
    r_rel = pose_j.rotation.matrix @ pose_i.rotation.matrix.T
    t_rel = pose_j.translation - r_rel @ pose_i.translation
    return Pose(Rotation3(r_rel), t_rel)


def rotation_error_deg(r1: Rotation3, r2: Rotation3) -> float:
    """Geodesic rotation error in degrees, in [0, 180]."""
    return 180.0 * rotation_geodesic_distance(r1, r2)


def translation_direction_error_deg(t1, t2) -> float:
    """Angle in degrees between two translation directions.

    Both vectors zero compares equal (0 deg); exactly one zero is maximally
    wrong (180 deg). Magnitudes are otherwise ignored, so the measure is
    invariant to global scale.
    """
    a = np.asarray(t1, dtype=np.float64)
    b = np.asarray(t2, dtype=np.float64)
    if a.shape != (3,) or b.shape != (3,):
        raise InvalidShape("translation direction arguments must be 3-vectors")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 180.0
    # atan2 of cross and dot stays exact where arccos of the normalized
    # dot product alone would round parallel vectors to ~1e-6 degrees.
    cross = float(np.linalg.norm(np.cross(a, b)))
    return math.degrees(math.atan2(cross, float(np.dot(a, b))))


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """y = scale * (rotation @ x) + translation."""

    scale: float
    rotation: Rotation3
    translation: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise InputError("scale must be finite and positive")
        object.__setattr__(
            self, "translation", _frozen_array(self.translation, (3,), "translation")
        )

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * (pts @ self.rotation.matrix.T) + self.translation

    def residual(self, src, dst, weights=None) -> float:
        """Weighted sum of squared alignment errors for this transform."""
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64)
        err = self.apply(src) - dst
        return float(np.sum(w * np.sum(err * err, axis=1)))


def weighted_similarity_procrustes(src, dst, weights=None) -> SimilarityTransform:
    """Least-squares similarity transform mapping src points onto dst points.

    Minimizes sum_k w_k * ||s * R @ x_k + t - y_k||^2 in closed form via the
    SVD of the weighted cross-covariance, with the determinant-sign
    correction that keeps R a proper rotation.

    Args:
        src: (N, 3) source points, N >= 3.
        dst: (N, 3) target points.
        weights: optional (N,) non-negative weights; uniform if omitted.

    Raises:
        DegenerateConfiguration: fewer than 3 points, all weight on
            coincident points, or a rank-deficient covariance (e.g. all
            points collinear), where the rotation is not determined.
    """
    x = np.asarray(src, dtype=np.float64)
    y = np.asarray(dst, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape != y.shape:
        raise InvalidShape("src and dst must both have shape (N, 3)")
    n = x.shape[0]
    if n < 3:
        raise DegenerateConfiguration("similarity fit needs at least 3 points")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,):
            raise InvalidShape("weights must have shape (N,)")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise DegenerateConfiguration("weights sum to zero")

    mu_x = (w[:, None] * x).sum(axis=0) / total
    mu_y = (w[:, None] * y).sum(axis=0) / total
    xc = x - mu_x
    yc = y - mu_y
    cov = (yc * w[:, None]).T @ xc / total
    var_x = float((w * np.sum(xc * xc, axis=1)).sum()) / total
    if var_x <= 0.0:
        raise DegenerateConfiguration("weighted source points are coincident")
    if np.linalg.matrix_rank(cov) < 2:
        raise DegenerateConfiguration("weighted covariance is rank-deficient")

    u, d, vt = np.linalg.svd(cov)
    s_fix = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0.0:
        s_fix[2, 2] = -1.0
    rot = Rotation3(u @ s_fix @ vt)
    scale = float((d * np.diag(s_fix)).sum()) / var_x
    if scale <= 0.0:
        raise DegenerateConfiguration("fitted scale is not positive")
    trans = mu_y - scale * (rot.matrix @ mu_x)
    return SimilarityTransform(scale, rot, trans)


@dataclass(frozen=True, eq=False)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels; pixel (i, j) has center (j + 0.5, i + 0.5)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise InputError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise InputError("image dimensions must be at least 1 pixel")

    def fov_h(self) -> float:
        return 2.0 * math.atan(self.width / (2.0 * self.fx))

    def fov_v(self) -> float:
        return 2.0 * math.atan(self.height / (2.0 * self.fy))


@dataclass(frozen=True, eq=False)
class CameraVector9:
    """Compact camera encoding: quaternion, translation, horizontal/vertical fov."""

    quat: UnitQuaternion
    translation: np.ndarray
    fov_h: float
    fov_v: float

    def __post_init__(self):
        object.__setattr__(
            self, "translation", _frozen_array(self.translation, (3,), "translation")
        )
        for f in (self.fov_h, self.fov_v):
            if not (0.0 < f < math.pi):
                raise InputError(f"field of view {f!r} outside (0, pi)")

    @staticmethod
    def from_pose_intrinsics(pose: Pose, intrinsics: CameraIntrinsics) -> "CameraVector9":
        return CameraVector9(
            rotation_to_quat(pose.rotation),
            pose.translation,
            intrinsics.fov_h(),
            intrinsics.fov_v(),
        )

    @staticmethod
    def from_array(values) -> "CameraVector9":
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (9,):
            raise InvalidShape("camera vector must have 9 components")
        quat = UnitQuaternion(*arr[:4])
        return CameraVector9(quat, arr[4:7], float(arr[7]), float(arr[8]))

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            [self.quat.as_array(), self.translation, [self.fov_h, self.fov_v]]
        )

    def pose(self) -> Pose:
        return Pose(quat_to_rotation(self.quat), self.translation)
