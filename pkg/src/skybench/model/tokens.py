"""Image tokenization and the satellite-isolating attention mask.

Per frame the token layout is [1 camera token, 4 register tokens, P
patch tokens]. The first input frame gets its own learnable camera and
register tokens; every other frame shares a second pair. Sinusoidal 2D
position encodings are added to patch tokens only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, InvalidShape
from .config import ModelConfig

MODALITIES = ("ground", "aerial", "satellite")
MODALITY_RANK = {m: i for i, m in enumerate(MODALITIES)}
N_REGISTER = 4
EXTRA_TOKENS = 1 + N_REGISTER  # camera + registers, prepended to patch tokens


@dataclass(frozen=True, eq=False)
class FrameTokens:
    """Tokens of one frame plus its tags."""

    camera: np.ndarray  # (1, C)
    register: np.ndarray  # (4, C)
    patch: np.ndarray  # (P, C)
    modality: str
    frame_index: int

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.camera, self.register, self.patch], axis=0)

    @property
    def count(self) -> int:
        return 1 + self.register.shape[0] + self.patch.shape[0]


def positional_encoding_2d(grid_rows: int, grid_cols: int, width: int) -> np.ndarray:
    """Fixed sin/cos encodings of the patch grid, shape (rows*cols, width).

    The width splits into four bands: sin/cos of the row index and
    sin/cos of the column index, each over width/4 frequencies.
    """
    if width % 4:
        raise InputError("width must be divisible by 4")
    quarter = width // 4
    freqs = 1.0 / (10000.0 ** (np.arange(quarter) / quarter))
    rows = np.arange(grid_rows)[:, None] * freqs[None, :]
    cols = np.arange(grid_cols)[:, None] * freqs[None, :]
    row_part = np.concatenate([np.sin(rows), np.cos(rows)], axis=1)  # (R, W/2)
    col_part = np.concatenate([np.sin(cols), np.cos(cols)], axis=1)  # (C, W/2)
    out = np.empty((grid_rows, grid_cols, width))
    out[:, :, : 2 * quarter] = row_part[:, None, :]
    out[:, :, 2 * quarter :] = col_part[None, :, :]
    return out.reshape(grid_rows * grid_cols, width)


def normalize_image(image, config: ModelConfig) -> np.ndarray:
    """Coerce to (H, W, channels) float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] != config.channels:
        raise InvalidShape(
            f"expected (H, W) or (H, W, {config.channels}) image, got shape {arr.shape}"
        )
    return arr


def patch_embed(
    image,
    modality: str,
    frame_index: int,
    config: ModelConfig,
    params: dict,
) -> FrameTokens:
    """Tokenize one frame: linear patch projection plus position codes.

    frame_index is the frame's position in the input batch; index 0
    selects the distinct first-frame camera/register tokens.
    """
    if modality not in MODALITIES:
        raise InputError(f"unknown modality {modality!r}")
    arr = normalize_image(image, config)
    h, w, _ = arr.shape
    gr, gc = config.patch_grid(h, w)
    p = config.patch
    patches = (
        arr.reshape(gr, p, gc, p, config.channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(gr * gc, p * p * config.channels)
    )
    tokens = patches @ params["embed/patch/w"] + params["embed/patch/b"]
    tokens = tokens + positional_encoding_2d(gr, gc, config.width)
    suffix = "first" if frame_index == 0 else "rest"
    return FrameTokens(
        camera=params[f"embed/camera_{suffix}"].copy(),
        register=params[f"embed/register_{suffix}"].copy(),
        patch=tokens,
        modality=modality,
        frame_index=frame_index,
    )


def build_attention_mask(tags, tokens_per_frame) -> np.ndarray:
    """Cross-frame mask: ground/aerial tokens cannot attend satellite ones.

    tags is one modality per frame; tokens_per_frame is an int shared by
    all frames or one count per frame. True means attention is allowed.
    Satellite rows are unrestricted; with no satellite frames the mask
    is all-true.
    """
    tags = list(tags)
    for tag in tags:
        if tag not in MODALITIES:
            raise InputError(f"unknown modality {tag!r}")
    if isinstance(tokens_per_frame, (int, np.integer)):
        counts = [int(tokens_per_frame)] * len(tags)
    else:
        counts = [int(c) for c in tokens_per_frame]
        if len(counts) != len(tags):
            raise InputError("tokens_per_frame does not align with tags")
    if any(c < 1 for c in counts):
        raise InputError("every frame needs at least one token")
    total = sum(counts)
    token_is_sat = np.zeros(total, dtype=bool)
    start = 0
    for tag, count in zip(tags, counts):
        if tag == "satellite":
            token_is_sat[start : start + count] = True
        start += count
    mask = np.ones((total, total), dtype=bool)
    mask[np.ix_(~token_is_sat, token_is_sat)] = False
    return mask
