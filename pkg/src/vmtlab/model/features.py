"""Clip feature storage: raw float32 matrices with JSON sidecars.

Each clip stores ``<id>.meta.json`` holding ``{"frames": T, "dim": D}`` and
``<id>.f32`` holding T*D row-major little-endian 32-bit floats.  A manifest
JSONL maps record ids to the ``.f32`` paths.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from ..errors import DataError


@dataclass
class FeatureSequence:
    video_id: str
    frames: int
    dim: int
    data: np.ndarray  # (frames, dim) float32

    def __post_init__(self):
        if self.data.shape != (self.frames, self.dim):
            raise DataError(
                f"feature matrix for {self.video_id!r} has shape {self.data.shape},"
                f" expected ({self.frames}, {self.dim})"
            )
        if not np.isfinite(self.data).all():
            raise DataError(f"non-finite value in features for {self.video_id!r}")


def _paths(directory: str, clip_id: str) -> tuple[str, str]:
    safe = clip_id.replace(os.sep, "_")
    return (
        os.path.join(directory, safe + ".meta.json"),
        os.path.join(directory, safe + ".f32"),
    )


def write_feature(directory: str, clip_id: str, data: np.ndarray) -> str:
    """Write one clip's features; returns the .f32 path."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2:
        raise DataError(f"features for {clip_id!r} must be 2-D, got shape {data.shape}")
    meta_path, raw_path = _paths(directory, clip_id)
    os.makedirs(directory, exist_ok=True)
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump({"frames": int(data.shape[0]), "dim": int(data.shape[1])}, f)
        f.write("\n")
    data.tofile(raw_path)
    return raw_path


def read_feature(directory: str, clip_id: str) -> FeatureSequence:
    meta_path, raw_path = _paths(directory, clip_id)
    try:
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise DataError(f"missing feature metadata for {clip_id!r}", path=meta_path) from None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid metadata JSON: {exc.msg}", path=meta_path) from None
    frames, dim = meta.get("frames"), meta.get("dim")
    if not isinstance(frames, int) or not isinstance(dim, int) or frames < 1 or dim < 1:
        raise DataError("metadata must contain positive integer 'frames' and 'dim'", path=meta_path)
    try:
        flat = np.fromfile(raw_path, dtype="<f4")
    except FileNotFoundError:
        raise DataError(f"missing feature data for {clip_id!r}", path=raw_path) from None
    if flat.size != frames * dim:
        raise DataError(
            f"feature data holds {flat.size} values, expected {frames * dim}", path=raw_path
        )
    return FeatureSequence(video_id=clip_id, frames=frames, dim=dim, data=flat.reshape(frames, dim))


def write_manifest(entries: dict[str, str], stream: TextIO) -> None:
    """record id -> feature file path, one JSON object per line."""
    for rid in entries:
        stream.write(json.dumps({"id": rid, "path": entries[rid]}, ensure_ascii=False))
        stream.write("\n")


def read_manifest(stream: TextIO) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
        if not isinstance(obj, dict) or "id" not in obj or "path" not in obj:
            raise DataError("manifest line needs 'id' and 'path'", line=lineno)
        if obj["id"] in entries:
            raise DataError(f"duplicate manifest id {obj['id']!r}", line=lineno)
        entries[obj["id"]] = obj["path"]
    return entries


class FeatureStore:
    """Manifest-backed lookup from record id to FeatureSequence."""

    def __init__(self, directory: str, manifest: dict[str, str]):
        self.directory = directory
        self.manifest = manifest

    @classmethod
    def open(cls, directory: str, manifest_path: str) -> "FeatureStore":
        with open(manifest_path, encoding="utf-8") as f:
            return cls(directory, read_manifest(f))

    def get(self, record_id: str) -> FeatureSequence:
        if record_id not in self.manifest:
            raise DataError(f"no features for record {record_id!r}")
        clip_id = os.path.basename(self.manifest[record_id])
        if clip_id.endswith(".f32"):
            clip_id = clip_id[: -len(".f32")]
        return read_feature(self.directory, clip_id)
