"""Turning corpus records plus stored features into padded tensor batches."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import torch

from ..corpus import CorpusRecord
from ..errors import DataError
from .features import FeatureStore
from .frames import sample_frames
from .vocab import BOS, EOS, PAD, Vocab


@dataclass
class Sample:
    record_id: str
    src_ids: tuple
    tgt_ids: tuple
    feats: np.ndarray  # (frames, d_feature) already subsampled


@dataclass
class Batch:
    record_ids: tuple
    src_ids: torch.Tensor    # (N, Lx) long
    src_mask: torch.Tensor   # (N, Lx) bool
    feats: torch.Tensor      # (N, F, d_feature) float
    feat_mask: torch.Tensor  # (N, F) bool
    tgt_in: torch.Tensor     # (N, Ly) long, starts with BOS
    tgt_out: torch.Tensor    # (N, Ly) long, ends with EOS
    tgt_mask: torch.Tensor   # (N, Ly) bool

    def to(self, dtype: torch.dtype) -> "Batch":
        return replace(self, feats=self.feats.to(dtype))

    def __len__(self) -> int:
        return self.src_ids.shape[0]


def make_sample(
    record: CorpusRecord,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    store: FeatureStore,
    max_frames: int,
    tokenizer: Callable[[str], list] = str.split,
) -> Sample:
    src_ids = tuple(src_vocab.encode(tokenizer(record.src)))
    tgt_ids = tuple(tgt_vocab.encode(tokenizer(record.tgt)))
    if not src_ids:
        raise DataError(f"record {record.id}: empty source")
    if not tgt_ids:
        raise DataError(f"record {record.id}: empty target")
    seq = store.get(record.id)
    picked = sample_frames(seq.frames, max_frames)
    return Sample(
        record_id=record.id,
        src_ids=src_ids,
        tgt_ids=tgt_ids,
        feats=seq.data[picked],
    )


def collate(samples: Sequence[Sample]) -> Batch:
    if not samples:
        raise DataError("cannot collate an empty batch")
    d_feature = samples[0].feats.shape[1]
    for s in samples:
        if s.feats.shape[1] != d_feature:
            raise DataError(f"record {s.record_id}: feature dim {s.feats.shape[1]} != {d_feature}")
    n = len(samples)
    lx = max(len(s.src_ids) for s in samples)
    ly = max(len(s.tgt_ids) for s in samples) + 1  # BOS prefix / EOS suffix
    frames = max(s.feats.shape[0] for s in samples)

    src_ids = torch.full((n, lx), PAD, dtype=torch.long)
    src_mask = torch.zeros(n, lx, dtype=torch.bool)
    feats = torch.zeros(n, frames, d_feature)
    feat_mask = torch.zeros(n, frames, dtype=torch.bool)
    tgt_in = torch.full((n, ly), PAD, dtype=torch.long)
    tgt_out = torch.full((n, ly), PAD, dtype=torch.long)
    tgt_mask = torch.zeros(n, ly, dtype=torch.bool)

    for i, s in enumerate(samples):
        src_ids[i, : len(s.src_ids)] = torch.tensor(s.src_ids, dtype=torch.long)
        src_mask[i, : len(s.src_ids)] = True
        f = s.feats.shape[0]
        feats[i, :f] = torch.from_numpy(np.ascontiguousarray(s.feats, dtype=np.float32))
        feat_mask[i, :f] = True
        t = len(s.tgt_ids)
        tgt_in[i, 0] = BOS
        tgt_in[i, 1 : t + 1] = torch.tensor(s.tgt_ids, dtype=torch.long)
        tgt_out[i, :t] = torch.tensor(s.tgt_ids, dtype=torch.long)
        tgt_out[i, t] = EOS
        tgt_mask[i, : t + 1] = True

    return Batch(
        record_ids=tuple(s.record_id for s in samples),
        src_ids=src_ids,
        src_mask=src_mask,
        feats=feats,
        feat_mask=feat_mask,
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        tgt_mask=tgt_mask,
    )


def samples_from_records(
    records: Sequence[CorpusRecord],
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    store: FeatureStore,
    max_frames: int,
    tokenizer: Callable[[str], list] = str.split,
) -> list:
    return [
        make_sample(r, src_vocab, tgt_vocab, store, max_frames, tokenizer) for r in records
    ]
