"""Two-stream forward pass and the multi-task loss.

The joint stream processes every frame with per-frame self-attention,
a cross-frame attention whose mask keeps ground/aerial tokens from
attending satellite tokens, and an MLP, per block. After each block the
satellite token slice is tapped off; the satellite stream re-embeds the
satellite frames and runs [cross-view attention, add the tap, MLP]
blocks on them alone. Camera and depth heads are shared across streams:
satellite frames decode from the satellite stream, ground/aerial frames
from the joint stream.

Frames after the first are processed in a canonical internal order
(sorted by modality then image bytes) and scattered back, which makes
permutation equivariance exact rather than approximate: reordering the
input frames cannot change any floating-point reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    InputError,
    InvalidBatch,
    InvalidPairing,
    InvalidShape,
    InvalidTaps,
)
from ..geometry import CameraVector9, UnitQuaternion
from .config import ModelConfig
from .layers import attention, layer_norm, mlp
from .tokens import (
    EXTRA_TOKENS,
    MODALITY_RANK,
    build_attention_mask,
    normalize_image,
    patch_embed,
)
from .weights import WeightBank


def joint_encoder_forward(stack, tags, config: ModelConfig, params: dict):
    """Run the all-modality stream.

    stack: (N, T, C) initial frame tokens; tags: one modality per frame.
    Returns (tokens, taps) where taps[i] is the (n_sat, T, C) satellite
    slice after block i. Ground/aerial rows are bit-exactly independent
    of satellite content: the masked attention never feeds satellite
    keys or values into their computation.
    """
    x = np.asarray(stack, dtype=np.float64)
    if x.ndim != 3:
        raise InvalidShape(f"expected (frames, tokens, width) stack, got {x.shape}")
    n, t, _ = x.shape
    if len(tags) != n:
        raise InputError("tags do not align with the token stack")
    mask = build_attention_mask(tags, t)
    sat_frames = np.array([tag == "satellite" for tag in tags])
    taps = []
    for i in range(config.blocks):
        frame_out = np.empty_like(x)
        for f in range(n):
            frame_out[f] = attention(
                params, f"joint/{i}/frame_attn", layer_norm(x[f]), config.heads
            )
        x = x + frame_out
        flat = x.reshape(n * t, config.width)
        flat = flat + attention(
            params, f"joint/{i}/global_attn", layer_norm(flat), config.heads, mask=mask
        )
        x = flat.reshape(n, t, config.width)
        x = x + mlp(params, f"joint/{i}/mlp", layer_norm(x))
        taps.append(x[sat_frames].copy())
    return x, taps


def satellite_encoder_forward(sat_stack, taps, config: ModelConfig, params: dict):
    """Run the satellite-only stream with per-block additive taps.

    sat_stack: (M, T, C) initial satellite tokens; taps: one (M, T, C)
    array per block, added after that block's cross-view attention.
    """
    z = np.asarray(sat_stack, dtype=np.float64)
    if z.ndim != 3 or z.shape[0] < 1:
        raise InvalidShape(f"expected (frames, tokens, width) stack, got {z.shape}")
    if len(taps) != config.blocks:
        raise InvalidTaps(f"expected {config.blocks} taps, got {len(taps)}")
    m, t, _ = z.shape
    for i, tap in enumerate(taps):
        tap = np.asarray(tap, dtype=np.float64)
        if tap.shape != z.shape:
            raise InvalidTaps(f"tap {i} shape {tap.shape} does not match {z.shape}")
        flat = z.reshape(m * t, config.width)
        flat = flat + attention(
            params, f"satellite/{i}/global_attn", layer_norm(flat), config.heads
        )
        z = flat.reshape(m, t, config.width) + tap
        z = z + mlp(params, f"satellite/{i}/mlp", layer_norm(z))
    return z


def camera_head_forward(camera_tokens, config: ModelConfig, params: dict) -> np.ndarray:
    """Map (M, C) camera tokens to raw (M, 9) camera vectors."""
    x = np.asarray(camera_tokens, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidShape("camera head needs at least one (M, C) token")
    for i in range(4):
        x = x + attention(params, f"camera_head/{i}/attn", layer_norm(x), config.heads)
    x = layer_norm(x)
    return x @ params["camera_head/out/w"] + params["camera_head/out/b"]


def camera_vector_from_raw(raw) -> CameraVector9:
    """Total map from 9 raw head outputs to a valid camera vector.

    Quaternion part is normalized (identity if numerically zero) and
    sign-canonicalized; fov components pass through a sigmoid scaled to
    (0, pi), clipped away from the open-interval endpoints.
    """
    raw = np.asarray(raw, dtype=np.float64)
    norm = float(np.linalg.norm(raw[:4]))
    if norm < 1e-12:
        quat = UnitQuaternion.identity()
    else:
        quat = UnitQuaternion.from_components(*raw[:4])
    sig = 1.0 / (1.0 + np.exp(-raw[7:9]))
    fov = np.pi * np.clip(sig, 1e-9, 1.0 - 1e-9)
    return CameraVector9(quat, raw[4:7], float(fov[0]), float(fov[1]))


def depth_head_forward(
    patch_tokens, config: ModelConfig, params: dict, image_shape
) -> np.ndarray:
    """Decode (P, C) patch tokens into a positive (H, W) depth raster."""
    tokens = np.asarray(patch_tokens, dtype=np.float64)
    h, w = image_shape
    gr, gc = config.patch_grid(h, w)
    if tokens.shape != (gr * gc, config.width):
        raise InvalidShape(
            f"expected ({gr * gc}, {config.width}) patch tokens, got {tokens.shape}"
        )
    raw = tokens @ params["depth_head/w"] + params["depth_head/b"]
    p = config.patch
    return np.exp(raw).reshape(gr, gc, p, p).transpose(0, 2, 1, 3).reshape(h, w)


@dataclass(frozen=True, eq=False)
class ForwardOutput:
    """Per-frame predictions plus which stream produced each camera."""

    cameras: tuple[CameraVector9, ...]
    depths: tuple[np.ndarray, ...]
    provenance: tuple[str, ...]  # "joint" or "satellite" per frame

    def __post_init__(self):
        if not len(self.cameras) == len(self.depths) == len(self.provenance):
            raise InputError("per-frame fields must have equal length")


def _canonical_order(images, modalities):
    """Frame 0 first; the rest sorted by (modality rank, image bytes).

    A fixed internal order makes every attention reduction independent
    of how the caller arranged the batch.
    """
    rest = sorted(
        range(1, len(images)),
        key=lambda i: (MODALITY_RANK[modalities[i]], images[i].tobytes()),
    )
    return [0] + rest


def forward_model(images, modalities, config: ModelConfig, bank: WeightBank) -> ForwardOutput:
    """Full two-stream forward: one camera vector and depth map per frame."""
    modalities = list(modalities)
    if len(modalities) == 0:
        raise InvalidBatch("forward needs at least one frame")
    for tag in modalities:
        if tag not in MODALITY_RANK:
            raise InputError(f"unknown modality {tag!r}")
    arrays = [normalize_image(img, config) for img in images]
    if len(arrays) != len(modalities):
        raise InvalidPairing("images and modalities do not align")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise InvalidShape("all frames must share one resolution")
    h, w, _ = shape
    params = bank.as_float64()

    order = _canonical_order(arrays, modalities)
    frames = [
        patch_embed(arrays[i], modalities[i], i, config, params) for i in order
    ]
    tags = [f.modality for f in frames]
    stack = np.stack([f.stacked() for f in frames])

    joint_out, taps = joint_encoder_forward(stack, tags, config, params)

    sat_pos = [p for p, tag in enumerate(tags) if tag == "satellite"]
    ga_pos = [p for p, tag in enumerate(tags) if tag != "satellite"]
    sat_out = None
    if sat_pos:
        sat_out = satellite_encoder_forward(stack[sat_pos], taps, config, params)

    cameras: list = [None] * len(arrays)
    depths: list = [None] * len(arrays)
    provenance: list = [None] * len(arrays)
    if ga_pos:
        raw = camera_head_forward(joint_out[ga_pos, 0, :], config, params)
        for row, p in enumerate(ga_pos):
            orig = order[p]
            cameras[orig] = camera_vector_from_raw(raw[row])
            depths[orig] = depth_head_forward(
                joint_out[p, EXTRA_TOKENS:, :], config, params, (h, w)
            )
            provenance[orig] = "joint"
    if sat_pos:
        raw = camera_head_forward(sat_out[:, 0, :], config, params)
        for row, p in enumerate(sat_pos):
            orig = order[p]
            cameras[orig] = camera_vector_from_raw(raw[row])
            depths[orig] = depth_head_forward(
                sat_out[row, EXTRA_TOKENS:, :], config, params, (h, w)
            )
            provenance[orig] = "satellite"
    return ForwardOutput(tuple(cameras), tuple(depths), tuple(provenance))


def compute_loss(
    pred: ForwardOutput,
    gt_cameras,
    gt_depths,
    modalities,
    alpha: float = 0.4,
) -> tuple[float, dict]:
    """Total loss and its parts.

    Camera terms are the mean absolute error between predicted and true
    9-vectors (quaternions sign-canonical on both sides), averaged per
    modality group; the satellite group has unit weight, ground/aerial
    is scaled by alpha. Depth is mean absolute error over valid pixels
    (true depth > 0), averaged over all frames.
    """
    n = len(pred.cameras)
    if not n == len(gt_cameras) == len(gt_depths) == len(modalities):
        raise InvalidPairing("prediction and ground truth frame counts differ")
    if n == 0:
        raise InvalidBatch("loss needs at least one frame")
    sat_err, ga_err = [], []
    depth_terms = []
    for i in range(n):
        cam_mae = float(np.mean(np.abs(pred.cameras[i].as_array() - gt_cameras[i].as_array())))
        if modalities[i] == "satellite":
            sat_err.append(cam_mae)
        else:
            ga_err.append(cam_mae)
        gt_d = np.asarray(gt_depths[i], dtype=np.float64)
        pd = np.asarray(pred.depths[i], dtype=np.float64)
        if gt_d.shape != pd.shape:
            raise InvalidPairing(
                f"frame {i}: depth shapes {pd.shape} and {gt_d.shape} differ"
            )
        valid = gt_d > 0.0
        if valid.any():
            depth_terms.append(float(np.mean(np.abs(pd[valid] - gt_d[valid]))))
        else:
            depth_terms.append(0.0)
    cam_sat = float(np.mean(sat_err)) if sat_err else 0.0
    cam_ga = float(np.mean(ga_err)) if ga_err else 0.0
    depth = float(np.mean(depth_terms))
    total = cam_sat + alpha * cam_ga + depth
    parts = {
        "camera_satellite": cam_sat,
        "camera_ground_aerial": cam_ga,
        "depth": depth,
    }
    return total, parts
