"""Model hyperparameters for the forward-only two-stream transformer."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InputError


@dataclass(frozen=True)
class ModelConfig:
    """Desk-scale defaults: 4 blocks of width 32 over 32x32 single-channel
    images with 16x16 patches (4 patch tokens per frame)."""

    blocks: int = 4
    width: int = 32
    heads: int = 4
    patch: int = 16
    channels: int = 1
    seed: int = 0
    freeze_backbone: bool = True

    def __post_init__(self):
        if self.blocks < 1:
            raise InputError("blocks must be at least 1")
        if self.width < 4 or self.width % self.heads != 0:
            raise InputError("width must be divisible by the head count")
        # The 2D position encoding splits the width into four bands.
        if self.width % 4 != 0:
            raise InputError("width must be divisible by 4")
        if self.patch < 1:
            raise InputError("patch must be at least 1")
        if self.channels < 1:
            raise InputError("channels must be at least 1")

    @property
    def head_dim(self) -> int:
        return self.width // self.heads

    @property
    def mlp_width(self) -> int:
        return 4 * self.width

    def patch_grid(self, height: int, width: int) -> tuple[int, int]:
        """Patch-token grid (rows, cols) for an image, validating divisibility."""
        from ..errors import InvalidShape

        if height % self.patch or width % self.patch:
            raise InvalidShape(
                f"image {height}x{width} not divisible by patch size {self.patch}"
            )
        return height // self.patch, width // self.patch
