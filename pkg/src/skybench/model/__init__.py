"""Two-stream cross-view transformer: config, weights, layers, forward."""

from .config import ModelConfig
from .layers import attention, gelu, layer_norm, mlp
from .network import (
    ForwardOutput,
    camera_head_forward,
    camera_vector_from_raw,
    compute_loss,
    depth_head_forward,
    forward_model,
    joint_encoder_forward,
    satellite_encoder_forward,
)
from .tokens import (
    EXTRA_TOKENS,
    MODALITIES,
    MODALITY_RANK,
    N_REGISTER,
    FrameTokens,
    build_attention_mask,
    normalize_image,
    patch_embed,
    positional_encoding_2d,
)
from .weights import (
    WeightBank,
    build_weight_bank,
    load_weights,
    parameter_spec,
    save_weights,
)

__all__ = [
    "EXTRA_TOKENS",
    "MODALITIES",
    "MODALITY_RANK",
    "N_REGISTER",
    "ForwardOutput",
    "FrameTokens",
    "ModelConfig",
    "WeightBank",
    "attention",
    "build_attention_mask",
    "build_weight_bank",
    "camera_head_forward",
    "camera_vector_from_raw",
    "compute_loss",
    "depth_head_forward",
    "forward_model",
    "gelu",
    "joint_encoder_forward",
    "layer_norm",
    "load_weights",
    "mlp",
    "normalize_image",
    "parameter_spec",
    "patch_embed",
    "positional_encoding_2d",
    "satellite_encoder_forward",
    "save_weights",
]
