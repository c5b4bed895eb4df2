"""Corpus BLEU with exponential smoothing of zero n-gram counts.

Counts are pooled over the whole corpus (single reference per hypothesis),
modified n-gram precisions run n = 1..4, and the brevity penalty kicks in
when the hypothesis side is shorter than the reference side.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..errors import DataError

NGRAM_ORDER = 4

# Stand-in for log(0) so a zero precision collapses the geometric mean to 0
# instead of raising.
_LOG_ZERO = -9999999999


def _my_log(num: float) -> float:
    if num == 0.0:
        return _LOG_ZERO
    return math.log(num)


def extract_ngrams(tokens: Sequence[str], max_order: int = NGRAM_ORDER) -> Counter:
    ngrams: Counter = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            ngrams[tuple(tokens[i : i + n])] += 1
    return ngrams


@dataclass(frozen=True)
class BleuReport:
    bleu: float
    precisions: tuple[float, float, float, float]  # fractions in [0, 1]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    def as_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "hyp_len": self.hyp_len,
            "ref_len": self.ref_len,
        }


def bleu_corpus(
    hyps: Sequence[Sequence[str]],
    refs: Sequence[Sequence[str]],
    smoothing: str = "exp",
) -> BleuReport:
    """Corpus-level BLEU over pre-tokenized hypothesis/reference pairs."""
    if len(hyps) != len(refs):
        raise DataError(f"hypothesis/reference count mismatch: {len(hyps)} vs {len(refs)}")
    if not hyps:
        raise DataError("empty corpus")
    if smoothing not in ("exp", "none"):
        raise ValueError(f"unknown smoothing: {smoothing!r}")

    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_len += len(hyp)
        ref_len += len(ref)
        ref_ngrams = extract_ngrams(ref)
        for ngram, count in extract_ngrams(hyp).items():
            n = len(ngram) - 1
            correct[n] += min(count, ref_ngrams.get(ngram, 0))
            total[n] += count

    precisions = [0.0] * NGRAM_ORDER
    smooth_scale = 1.0
    for n in range(NGRAM_ORDER):
        if total[n] == 0:
            break
        if correct[n] == 0:
            if smoothing == "exp":
                # Each successive zero-count order halves the assumed precision.
                smooth_scale *= 2.0
                precisions[n] = 1.0 / (smooth_scale * total[n])
        else:
            precisions[n] = correct[n] / total[n]

    if hyp_len < ref_len:
        brevity_penalty = math.exp(1 - ref_len / hyp_len) if hyp_len > 0 else 0.0
    else:
        brevity_penalty = 1.0

    geo_mean = math.exp(sum(_my_log(p) for p in precisions) / NGRAM_ORDER)
    return BleuReport(
        bleu=brevity_penalty * geo_mean * 100.0,
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )
