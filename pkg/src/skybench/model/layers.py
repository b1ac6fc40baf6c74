"""Transformer building blocks in plain numpy, float64 throughout.

Masking is implemented by partitioning query rows on their permitted-key
pattern and slicing keys/values down to the permitted columns before any
matmul. That is numerically identical to additive -inf masking but
stronger in one testable way: excluded tokens never enter the arithmetic
at all, so restricted queries are bit-exactly independent of them.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InputError

_LN_EPS = 1e-6


def layer_norm(x: np.ndarray) -> np.ndarray:
    """Parameter-free layer norm over the last axis."""
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS)


def gelu(x: np.ndarray) -> np.ndarray:
    """Gaussian error linear unit, tanh approximation."""
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def mlp(params: dict, prefix: str, x: np.ndarray) -> np.ndarray:
    h = gelu(x @ params[f"{prefix}/w1"] + params[f"{prefix}/b1"])
    return h @ params[f"{prefix}/w2"] + params[f"{prefix}/b2"]


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    t, c = x.shape
    return x.reshape(t, heads, c // heads).transpose(1, 0, 2)  # (heads, T, dh)


def attention(
    params: dict,
    prefix: str,
    x: np.ndarray,
    heads: int,
    mask: np.ndarray | None = None,
    return_weights: bool = False,
):
    """Multi-head self-attention over tokens x (T, C).

    mask is an optional (T, T) boolean matrix, True where the query row
    may attend the key column; every row must permit at least one key.
    With return_weights, also returns (heads, T, T) softmax weights with
    zeros at blocked entries.
    """
    t, c = x.shape
    if c % heads:
        raise InputError("token width not divisible by head count")
    q = _split_heads(x @ params[f"{prefix}/q_w"] + params[f"{prefix}/q_b"], heads)
    k = _split_heads(x @ params[f"{prefix}/k_w"] + params[f"{prefix}/k_b"], heads)
    v = _split_heads(x @ params[f"{prefix}/v_w"] + params[f"{prefix}/v_b"], heads)
    scale = 1.0 / math.sqrt(c // heads)

    if mask is None:
        weights = _softmax(q @ k.transpose(0, 2, 1) * scale)
        heads_out = weights @ v
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (t, t):
            raise InputError(f"mask shape {mask.shape} does not match {t} tokens")
        if not mask.any(axis=1).all():
            raise InputError("every query row must permit at least one key")
        heads_out = np.empty_like(q)
        weights = np.zeros((heads, t, t)) if return_weights else None
        # One attention computation per distinct permitted-key pattern.
        seen: dict[bytes, list[int]] = {}
        for row in range(t):
            seen.setdefault(mask[row].tobytes(), []).append(row)
        for pattern, rows in seen.items():
            cols = np.nonzero(np.frombuffer(pattern, dtype=bool))[0]
            sub = _softmax(q[:, rows] @ k[:, cols].transpose(0, 2, 1) * scale)
            heads_out[:, rows] = sub @ v[:, cols]
            if return_weights:
                weights[np.ix_(range(heads), rows, cols)] = sub

    out = heads_out.transpose(1, 0, 2).reshape(t, c)
    out = out @ params[f"{prefix}/o_w"] + params[f"{prefix}/o_b"]
    if return_weights:
        return out, weights
    return out
