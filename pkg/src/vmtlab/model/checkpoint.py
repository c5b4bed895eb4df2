"""Self-contained binary checkpoints.

Layout: the magic string, a length-prefixed JSON dump of the model config,
then a count of named tensors.  Each tensor stores a length-prefixed utf-8
name, a rank byte, uint32 dims, and the values as little-endian float64 so
float32 weights round-trip exactly.  All integers are little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..errors import DataError
from .config import ModelConfig
from .transformer import VideoGuidedTransformer

MAGIC = b"VMTCKPT1"


def save_checkpoint(path, model: VideoGuidedTransformer) -> None:
    state = model.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        config_blob = json.dumps(model.config.as_dict(), sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)
        fh.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            name_blob = name.encode("utf-8")
            if len(name_blob) > 0xFFFF:
                raise DataError(f"tensor name too long: {name}")
            arr = tensor.detach().cpu().numpy().astype("<f8")
            fh.write(struct.pack("<H", len(name_blob)))
            fh.write(name_blob)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(arr).tobytes())


def _read_exact(fh, n: int, path, what: str) -> bytes:
    blob = fh.read(n)
    if len(blob) != n:
        raise DataError(f"truncated checkpoint while reading {what}", path=str(path))
    return blob


def load_checkpoint(path):
    """Read a checkpoint back as (ModelConfig, dict of float64 tensors)."""
    path = Path(path)
    if not path.exists():
        raise DataError("checkpoint not found", path=str(path))
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError("not a checkpoint file (bad magic)", path=str(path))
        (config_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "config length"))
        config_blob = _read_exact(fh, config_len, path, "config")
        try:
            config_dict = json.loads(config_blob.decode("utf-8"))
            config = ModelConfig(**config_dict)
        except (ValueError, TypeError) as exc:
            raise DataError(f"invalid checkpoint config: {exc}", path=str(path)) from exc
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path, "tensor count"))
        state = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path, "name length"))
            name = _read_exact(fh, name_len, path, "tensor name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path, "rank"))
            dims = struct.unpack(
                "<" + "I" * ndim, _read_exact(fh, 4 * ndim, path, f"dims of {name}")
            )
            numel = 1
            for d in dims:
                numel *= d
            blob = _read_exact(fh, 8 * numel, path, f"data of {name}")
            arr = np.frombuffer(blob, dtype="<f8").reshape(dims).copy()
            state[name] = torch.from_numpy(arr)
        trailing = fh.read(1)
    if trailing:
        raise DataError("trailing bytes after last tensor", path=str(path))
    return config, state


def load_model(path) -> VideoGuidedTransformer:
    config, state = load_checkpoint(path)
    model = VideoGuidedTransformer(config)
    converted = {name: tensor.to(torch.float32) for name, tensor in state.items()}
    missing, unexpected = model.load_state_dict(converted, strict=False)
    if missing or unexpected:
        raise DataError(
            "checkpoint does not match model "
            f"(missing={sorted(missing)}, unexpected={sorted(unexpected)})",
            path=str(path),
        )
    return model
