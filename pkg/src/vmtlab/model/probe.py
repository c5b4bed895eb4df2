"""Mismatched-video probe: decode with each clip's features swapped away.

If the decoder actually uses the visual channel, shuffling which video goes
with which sentence should cost accuracy.  The shuffle is a derangement so
no sample keeps its own features.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from ..errors import DataError
from ..metrics.terms import EvalPair, EvalReport, evaluate
from .batching import Sample
from .decode import beam_decode
from .transformer import VideoGuidedTransformer
from .vocab import Vocab


def derangement(n: int, seed: int) -> list:
    """Random permutation with no fixed points (a single uniform cycle)."""
    if n < 2:
        raise DataError("need at least two samples to swap videos")
    perm = list(range(n))
    rng = random.Random(seed)
    i = n
    while i > 1:
        i -= 1
        j = rng.randrange(i)  # j < i, so perm[k] != k is preserved throughout
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass
class ProbeReport:
    congruent: EvalReport
    incongruent: EvalReport
    deltas: dict  # congruent minus incongruent, per metric

    def as_dict(self) -> dict:
        return {
            "congruent": self.congruent.as_dict(),
            "incongruent": self.incongruent.as_dict(),
            "deltas": self.deltas,
        }


def _pairs_from_results(samples, results, tgt_vocab, annotations_by_id):
    pairs = []
    for sample, result in zip(samples, results):
        anns = tuple(annotations_by_id.get(sample.record_id, ()))
        pairs.append(
            EvalPair(
                record_id=sample.record_id,
                hyp_tokens=tuple(tgt_vocab.decode(result.token_ids)),
                ref_tokens=tuple(tgt_vocab.decode(sample.tgt_ids)),
                annotations=anns,
            )
        )
    return pairs


def incongruent_probe(
    model: VideoGuidedTransformer,
    samples: Sequence[Sample],
    tgt_vocab: Vocab,
    annotations_by_id: Mapping[str, Sequence] = {},
    stopwords: frozenset = frozenset(),
    beam_size: int = 4,
    seed: int = 0,
) -> ProbeReport:
    congruent_results = beam_decode(model, samples, beam_size=beam_size)
    perm = derangement(len(samples), seed)
    swapped = [replace(samples[i], feats=samples[perm[i]].feats) for i in range(len(samples))]
    incongruent_results = beam_decode(model, swapped, beam_size=beam_size)

    congruent = evaluate(
        _pairs_from_results(samples, congruent_results, tgt_vocab, annotations_by_id),
        stopwords=stopwords,
    )
    incongruent = evaluate(
        _pairs_from_results(samples, incongruent_results, tgt_vocab, annotations_by_id),
        stopwords=stopwords,
    )

    deltas = {"bleu": congruent.bleu.bleu - incongruent.bleu.bleu}
    if congruent.term_scores and incongruent.term_scores:
        for key in ("exact_match", "window_overlap_2", "window_overlap_3", "one_minus_term"):
            deltas[key] = getattr(congruent.term_scores, key) - getattr(
                incongruent.term_scores, key
            )
    return ProbeReport(congruent=congruent, incongruent=incongruent, deltas=deltas)
