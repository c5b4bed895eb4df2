"""Beam search decoding, one sample at a time so padding never leaks in."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import torch

from ..errors import DataError
from .batching import Sample, collate
from .transformer import VideoGuidedTransformer
from .vocab import BOS, EOS, PAD, Vocab


@dataclass
class DecodeResult:
    record_id: str
    token_ids: tuple      # generated ids, BOS/EOS stripped
    score: float          # length-normalized log probability
    truncated: bool       # ran out of budget before emitting EOS


def _normalized(score_sum: float, length: int, length_penalty: float) -> float:
    return score_sum / (max(1, length) ** length_penalty)


def beam_decode_sample(
    model: VideoGuidedTransformer,
    sample: Sample,
    beam_size: int = 4,
    length_penalty: float = 1.0,
    max_len: Optional[int] = None,
) -> DecodeResult:
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if max_len is None:
        max_len = model.config.max_text_len - 1
    model.eval()
    with torch.no_grad():
        batch = collate([sample]).to(next(model.parameters()).dtype)
        enc_out, enc_mask, _, _ = model.encode(
            batch.feats, batch.feat_mask, batch.src_ids, batch.src_mask
        )
        # beams: (score_sum, ids-with-BOS, finished)
        beams = [(0.0, (BOS,), False)]
        for _ in range(max_len):
            if all(b[2] for b in beams):
                break
            live = [b for b in beams if not b[2]]
            done = [b for b in beams if b[2]]
            tgt_in = torch.tensor([b[1] for b in live], dtype=torch.long)
            tgt_mask = torch.ones_like(tgt_in, dtype=torch.bool)
            k = len(live)
            logits = model.decode(
                enc_out.expand(k, -1, -1), enc_mask.expand(k, -1), tgt_in, tgt_mask
            )
            logp = torch.log_softmax(logits[:, -1, :], dim=-1)
            logp[:, PAD] = -math.inf
            logp[:, BOS] = -math.inf
            candidates = list(done)
            for i, (score_sum, ids, _) in enumerate(live):
                row = logp[i]
                top = torch.topk(row, min(beam_size, row.shape[0]))
                for val, tok in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append((score_sum + val, ids + (tok,), tok == EOS))
            # deterministic: higher normalized score wins, then smaller ids
            candidates.sort(key=lambda b: (-_normalized(b[0], len(b[1]) - 1, length_penalty), b[1]))
            beams = candidates[:beam_size]
        best = beams[0]
        ids = tuple(t for t in best[1] if t not in (BOS, EOS))
        return DecodeResult(
            record_id=sample.record_id,
            token_ids=ids,
            score=_normalized(best[0], len(best[1]) - 1, length_penalty),
            truncated=not best[2],
        )


def beam_decode(
    model: VideoGuidedTransformer,
    samples: Sequence[Sample],
    beam_size: int = 4,
    length_penalty: float = 1.0,
    max_len: Optional[int] = None,
) -> list:
    return [
        beam_decode_sample(model, s, beam_size, length_penalty, max_len) for s in samples
    ]


def decode_to_text(result: DecodeResult, tgt_vocab: Vocab) -> str:
    return " ".join(tgt_vocab.decode(result.token_ids))
