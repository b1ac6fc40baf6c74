"""Deterministic weight bank: named f32 tensors generated from one seed.

The bank is a stand-in for pretrained weights: every architecture
invariant under test is weight-agnostic, so uniform random tensors in
[-1/sqrt(width), 1/sqrt(width)] suffice. Tensors are drawn in a fixed
name order so identical (config, seed) yields bit-identical banks.
Serialization is one flat little-endian f32 blob plus a JSON sidecar
listing (name, shape, offset, frozen).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, InputError
from .config import ModelConfig

_ATTN_PARTS = ("q_w", "q_b", "k_w", "k_b", "v_w", "v_b", "o_w", "o_b")


def _attention_shapes(width: int):
    for part in _ATTN_PARTS:
        yield part, (width, width) if part.endswith("_w") else (width,)


def parameter_spec(config: ModelConfig) -> list[tuple[str, tuple[int, ...], bool]]:
    """Ordered (name, shape, frozen) for every tensor in the bank."""
    c = config.width
    spec: list[tuple[str, tuple[int, ...], bool]] = []

    def add(name, shape, frozen=False):
        spec.append((name, tuple(shape), bool(frozen)))

    add("embed/patch/w", (config.patch * config.patch * config.channels, c))
    add("embed/patch/b", (c,))
    add("embed/camera_first", (1, c))
    add("embed/register_first", (4, c))
    add("embed/camera_rest", (1, c))
    add("embed/register_rest", (4, c))
    frozen = config.freeze_backbone
    for i in range(config.blocks):
        for part, shape in _attention_shapes(c):
            add(f"joint/{i}/frame_attn/{part}", shape, frozen)
        for part, shape in _attention_shapes(c):
            add(f"joint/{i}/global_attn/{part}", shape, frozen)
        add(f"joint/{i}/mlp/w1", (c, config.mlp_width))
        add(f"joint/{i}/mlp/b1", (config.mlp_width,))
        add(f"joint/{i}/mlp/w2", (config.mlp_width, c))
        add(f"joint/{i}/mlp/b2", (c,))
    for i in range(config.blocks):
        for part, shape in _attention_shapes(c):
            add(f"satellite/{i}/global_attn/{part}", shape)
        add(f"satellite/{i}/mlp/w1", (c, config.mlp_width))
        add(f"satellite/{i}/mlp/b1", (config.mlp_width,))
        add(f"satellite/{i}/mlp/w2", (config.mlp_width, c))
        add(f"satellite/{i}/mlp/b2", (c,))
    for i in range(4):
        for part, shape in _attention_shapes(c):
            add(f"camera_head/{i}/attn/{part}", shape)
    add("camera_head/out/w", (c, 9))
    add("camera_head/out/b", (9,))
    add("depth_head/w", (c, config.patch * config.patch))
    add("depth_head/b", (config.patch * config.patch,))
    return spec


@dataclass(frozen=True, eq=False)
class WeightBank:
    """Named f32 tensors plus the set of frozen (non-trainable) names."""

    tensors: dict[str, np.ndarray]
    frozen: frozenset[str]

    def __post_init__(self):
        for name, arr in self.tensors.items():
            if arr.dtype != np.float32:
                raise InputError(f"{name}: weight tensors must be float32")
        unknown = self.frozen - set(self.tensors)
        if unknown:
            raise InputError(f"frozen names not in bank: {sorted(unknown)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def trainable_names(self) -> list[str]:
        return [n for n in self.tensors if n not in self.frozen]

    def as_float64(self) -> dict[str, np.ndarray]:
        """Promote every tensor once; forward math runs in float64."""
        return {n: a.astype(np.float64) for n, a in self.tensors.items()}


def build_weight_bank(config: ModelConfig) -> WeightBank:
    rng = np.random.default_rng(config.seed)
    bound = 1.0 / math.sqrt(config.width)
    tensors = {}
    frozen = set()
    for name, shape, is_frozen in parameter_spec(config):
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        if is_frozen:
            frozen.add(name)
    return WeightBank(tensors=tensors, frozen=frozenset(frozen))


def save_weights(bank: WeightBank, path) -> Path:
    """Write {path} (flat f32) and {path}.json (tensor directory)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    index = []
    offset = 0
    chunks = []
    for name, arr in bank.tensors.items():
        data = arr.astype("<f4").tobytes(order="C")
        index.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": offset,
                "frozen": name in bank.frozen,
            }
        )
        chunks.append(data)
        offset += len(data)
    path.write_bytes(b"".join(chunks))
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(index, indent=2) + "\n")
    return path


def load_weights(path) -> WeightBank:
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    if not path.is_file() or not sidecar.is_file():
        raise DataError(f"missing weight file or sidecar for {path}")
    try:
        index = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{sidecar}: invalid JSON: {exc}") from exc
    blob = path.read_bytes()
    tensors = {}
    frozen = set()
    for entry in index:
        name = entry["name"]
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(blob):
            raise DataError(f"{path}: tensor {name} runs past end of file")
        tensors[name] = (
            np.frombuffer(blob[start:end], dtype="<f4").reshape(shape).astype(np.float32)
        )
        if entry.get("frozen"):
            frozen.add(name)
    return WeightBank(tensors=tensors, frozen=frozenset(frozen))
