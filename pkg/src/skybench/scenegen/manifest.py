"""Site manifest schema and binary depth raster format.

The manifest is plain JSON with a fixed field order so that
write -> read -> write is byte-identical; floats rely on repr round-trip.
Depth rasters are "SKYD" + three little-endian u32 (width, height,
reserved) + row-major little-endian f32 samples.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import DataError, InputError, ManifestParseError
from ..geometry import CameraIntrinsics, Pose, UnitQuaternion, quat_to_rotation

MODALITIES = ("ground", "aerial", "satellite")

# Above-ground-level bands in meters, per modality.
ALTITUDE_BANDS = {
    "ground": (5.0, 80.0),
    "aerial": (200.0, 800.0),
    "satellite": (1000.0, 2000.0),
}

DEPTH_MAGIC = b"SKYD"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True, eq=False)
class ViewRecord:
    """One camera view. Stores the quaternion it was serialized with so a
    round trip through JSON never re-derives (and perturbs) the floats."""

    id: str
    modality: str
    quat: UnitQuaternion
    translation: np.ndarray
    intrinsics: CameraIntrinsics
    altitude_agl: float
    depth_path: str | None = None
    is_real: bool = False

    def __post_init__(self):
        if not self.id:
            raise InputError("view id must be non-empty")
        if self.modality not in MODALITIES:
            raise InputError(f"unknown modality {self.modality!r}")
        lo, hi = ALTITUDE_BANDS[self.modality]
        if not lo <= self.altitude_agl <= hi:
            raise InputError(
                f"altitude_agl {self.altitude_agl} outside [{lo}, {hi}] for {self.modality}"
            )
        t = np.array(self.translation, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InputError("translation must be a finite 3-vector")
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)

    def pose(self) -> Pose:
        return Pose(quat_to_rotation(self.quat), self.translation)

    def with_depth_path(self, depth_path: str) -> "ViewRecord":
        return replace(self, depth_path=depth_path)


@dataclass(frozen=True, eq=False)
class SiteManifest:
    site_id: str
    landmark_center: np.ndarray
    views: tuple[ViewRecord, ...]

    def __post_init__(self):
        if not self.site_id:
            raise InputError("site_id must be non-empty")
        c = np.array(self.landmark_center, dtype=np.float64)
        if c.shape != (3,):
            raise InputError("landmark_center must be a 3-vector")
        c.flags.writeable = False
        object.__setattr__(self, "landmark_center", c)
        object.__setattr__(self, "views", tuple(self.views))
        seen = set()
        for v in self.views:
            if v.id in seen:
                raise InputError(f"duplicate view id {v.id!r}")
            seen.add(v.id)

    def view_by_id(self, view_id: str) -> ViewRecord:
        for v in self.views:
            if v.id == view_id:
                return v
        raise KeyError(view_id)

    def by_modality(self, modality: str) -> tuple[ViewRecord, ...]:
        return tuple(v for v in self.views if v.modality == modality)


def _view_to_json(v: ViewRecord) -> dict:
    return {
        "id": v.id,
        "modality": v.modality,
        "quat_wxyz": [v.quat.w, v.quat.x, v.quat.y, v.quat.z],
        "translation_xyz": [float(x) for x in v.translation],
        "fx": float(v.intrinsics.fx),
        "fy": float(v.intrinsics.fy),
        "cx": float(v.intrinsics.cx),
        "cy": float(v.intrinsics.cy),
        "width": int(v.intrinsics.width),
        "height": int(v.intrinsics.height),
        "altitude_agl": float(v.altitude_agl),
        "depth_path": v.depth_path,
        "is_real": bool(v.is_real),
    }


def manifest_path(site_dir) -> Path:
    p = Path(site_dir)
    return p if p.suffix == ".json" else p / MANIFEST_NAME


def write_manifest(manifest: SiteManifest, site_dir) -> Path:
    """Write {site_dir}/manifest.json; returns the path written."""
    doc = {
        "site_id": manifest.site_id,
        "landmark_center": [float(x) for x in manifest.landmark_center],
        "views": [_view_to_json(v) for v in manifest.views],
    }
    path = Path(site_dir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def _require(doc: dict, key: str, kinds, where: str):
    if key not in doc:
        raise ManifestParseError(f"{where}.{key}: missing")
    val = doc[key]
    # bool is an int subclass; only accept it where bool is asked for.
    ok = isinstance(val, bool) if kinds is bool else (
        isinstance(val, kinds) and not isinstance(val, bool)
    )
    if not ok:
        raise ManifestParseError(f"{where}.{key}: unexpected type {type(val).__name__}")
    return val


def _number(doc: dict, key: str, where: str) -> float:
    val = _require(doc, key, (int, float), where)
    return float(val)


def _vector(doc: dict, key: str, length: int, where: str) -> list[float]:
    val = _require(doc, key, list, where)
    if len(val) != length or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
        raise ManifestParseError(f"{where}.{key}: expected {length} numbers")
    return [float(x) for x in val]


def _parse_view(doc, where: str) -> ViewRecord:
    if not isinstance(doc, dict):
        raise ManifestParseError(f"{where}: expected an object")
    quat_vals = _vector(doc, "quat_wxyz", 4, where)
    depth_path = doc.get("depth_path")
    if depth_path is not None and not isinstance(depth_path, str):
        raise ManifestParseError(f"{where}.depth_path: expected string or null")
    try:
        quat = UnitQuaternion(*quat_vals)
        intr = CameraIntrinsics(
            fx=_number(doc, "fx", where),
            fy=_number(doc, "fy", where),
            cx=_number(doc, "cx", where),
            cy=_number(doc, "cy", where),
            width=int(_require(doc, "width", int, where)),
            height=int(_require(doc, "height", int, where)),
        )
        return ViewRecord(
            id=_require(doc, "id", str, where),
            modality=_require(doc, "modality", str, where),
            quat=quat,
            translation=_vector(doc, "translation_xyz", 3, where),
            intrinsics=intr,
            altitude_agl=_number(doc, "altitude_agl", where),
            depth_path=depth_path,
            is_real=_require(doc, "is_real", bool, where),
        )
    except InputError as exc:
        raise ManifestParseError(f"{where}: {exc}") from exc


def read_manifest(site_dir) -> SiteManifest:
    """Read and validate a manifest from a site directory (or a direct path)."""
    path = manifest_path(site_dir)
    if not path.is_file():
        raise ManifestParseError(f"no manifest at {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestParseError("manifest root must be an object")
    views_doc = _require(doc, "views", list, "manifest")
    views = [_parse_view(v, f"views[{i}]") for i, v in enumerate(views_doc)]
    try:
        return SiteManifest(
            site_id=_require(doc, "site_id", str, "manifest"),
            landmark_center=_vector(doc, "landmark_center", 3, "manifest"),
            views=tuple(views),
        )
    except InputError as exc:
        raise ManifestParseError(str(exc)) from exc


def write_depth_raster(path, depth: np.ndarray) -> Path:
    """Write a (H, W) non-negative float32 raster in the SKYD layout."""
    arr = np.asarray(depth)
    if arr.ndim != 2:
        raise InputError(f"depth raster must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise InputError("depth raster values must be finite and non-negative")
    arr = arr.astype("<f4")
    h, w = arr.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(DEPTH_MAGIC)
        fh.write(struct.pack("<III", w, h, 0))
        fh.write(arr.tobytes(order="C"))
    return path


def read_depth_raster(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != DEPTH_MAGIC:
        raise DataError(f"{path}: not a depth raster (bad magic)")
    w, h, _reserved = struct.unpack("<III", blob[4:16])
    expected = 16 + 4 * w * h
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes for {w}x{h}, got {len(blob)}")
    return np.frombuffer(blob[16:], dtype="<f4").reshape(h, w).astype(np.float32)
