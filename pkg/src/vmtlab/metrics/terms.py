"""Terminology-targeted evaluation: Exact Match, Window Overlap, 1-TERm.

Annotations mark ambiguous source terms together with their acceptable
target renderings; all matching happens on the target side between the
hypothesis and the reference.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Sequence, TextIO

from ..errors import DataError
from .bleu import BleuReport, bleu_corpus
from .ter import term_edit_rate


@dataclass(frozen=True)
class TermAnnotation:
    record_id: str
    src_term: tuple[str, ...]
    tgt_variants: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.tgt_variants:
            raise DataError(f"annotation for {self.record_id!r} has no target variants")
        if any(len(v) == 0 for v in self.tgt_variants):
            raise DataError(f"annotation for {self.record_id!r} has an empty variant")


@dataclass(frozen=True)
class EvalPair:
    record_id: str
    hyp_tokens: tuple[str, ...]
    ref_tokens: tuple[str, ...]
    annotations: tuple[TermAnnotation, ...] = ()


@dataclass(frozen=True)
class TermScores:
    exact_match: float
    window_overlap_2: float
    window_overlap_3: float
    one_minus_term: float
    counts: dict

    def as_dict(self) -> dict:
        return {
            "exact_match": self.exact_match,
            "window_overlap_2": self.window_overlap_2,
            "window_overlap_3": self.window_overlap_3,
            "one_minus_term": self.one_minus_term,
            "counts": dict(self.counts),
        }


def find_subsequence(haystack: Sequence[str], needle: Sequence[str], start: int = 0) -> int:
    """Index of the first contiguous occurrence of needle, or -1."""
    n, m = len(haystack), len(needle)
    if m == 0:
        return -1
    for i in range(start, n - m + 1):
        if list(haystack[i : i + m]) == list(needle):
            return i
    return -1


def _first_match(tokens: Sequence[str], variants) -> tuple[int, tuple[str, ...] | None]:
    """Earliest occurrence over all variants; ties go to the earlier variant."""
    best_pos, best_variant = -1, None
    for variant in variants:
        pos = find_subsequence(tokens, variant)
        if pos >= 0 and (best_pos < 0 or pos < best_pos):
            best_pos, best_variant = pos, variant
    return best_pos, best_variant


def _count_terms(pairs: Sequence[EvalPair]) -> int:
    return sum(len(p.annotations) for p in pairs)


def exact_match(pairs: Sequence[EvalPair]) -> tuple[float, list[dict]]:
    """Fraction of annotated terms whose rendering appears in the hypothesis."""
    if _count_terms(pairs) == 0:
        raise DataError("no terms")
    outcomes = []
    correct = 0
    for pair in pairs:
        for ann in pair.annotations:
            pos, _ = _first_match(pair.hyp_tokens, ann.tgt_variants)
            matched = pos >= 0
            correct += matched
            outcomes.append(
                {"record_id": pair.record_id, "src_term": list(ann.src_term), "matched": matched}
            )
    return correct / len(outcomes), outcomes


def _context_window(tokens: Sequence[str], start: int, length: int, k: int, stopwords) -> Counter:
    """Up to k non-stopword tokens on each side of the span, as a multiset."""
    window: Counter = Counter()
    taken = 0
    for i in range(start - 1, -1, -1):
        if taken == k:
            break
        if tokens[i] not in stopwords:
            window[tokens[i]] += 1
            taken += 1
    taken = 0
    for i in range(start + length, len(tokens)):
        if taken == k:
            break
        if tokens[i] not in stopwords:
            window[tokens[i]] += 1
            taken += 1
    return window


def window_overlap(
    pairs: Sequence[EvalPair], k: int, stopwords: frozenset[str] = frozenset()
) -> tuple[float, list[dict]]:
    """Mean per-term context agreement around the first matched occurrence.

    A term whose rendering is absent from the hypothesis scores 0.  The score
    compares the multisets of up to k non-stopword neighbours on each side,
    normalized by the reference window size.
    """
    if _count_terms(pairs) == 0:
        raise DataError("no terms")
    scores = []
    details = []
    for pair in pairs:
        for ann in pair.annotations:
            hyp_pos, variant = _first_match(pair.hyp_tokens, ann.tgt_variants)
            if hyp_pos < 0:
                score = 0.0
            else:
                ref_pos = find_subsequence(pair.ref_tokens, variant)
                hyp_win = _context_window(pair.hyp_tokens, hyp_pos, len(variant), k, stopwords)
                if ref_pos < 0:
                    ref_win: Counter = Counter()
                else:
                    ref_win = _context_window(pair.ref_tokens, ref_pos, len(variant), k, stopwords)
                inter = sum((hyp_win & ref_win).values())
                score = inter / max(1, sum(ref_win.values()))
            scores.append(score)
            details.append(
                {"record_id": pair.record_id, "src_term": list(ann.src_term), "score": score}
            )
    return sum(scores) / len(scores), details


def reference_term_positions(pair: EvalPair) -> set[int]:
    """Reference indices covered by any occurrence of any annotated variant."""
    positions: set[int] = set()
    for ann in pair.annotations:
        for variant in ann.tgt_variants:
            start = 0
            while True:
                pos = find_subsequence(pair.ref_tokens, variant, start)
                if pos < 0:
                    break
                positions.update(range(pos, pos + len(variant)))
                start = pos + 1
    return positions


@dataclass(frozen=True)
class EvalReport:
    bleu: BleuReport
    term_scores: TermScores | None
    per_record: list[dict] | None = None

    def as_dict(self) -> dict:
        out = {"bleu": self.bleu.as_dict()}
        out["term_scores"] = self.term_scores.as_dict() if self.term_scores else None
        if self.per_record is not None:
            out["per_record"] = self.per_record
        return out


def evaluate(
    pairs: Sequence[EvalPair],
    stopwords: frozenset[str] = frozenset(),
    term_cost: float = 2.0,
    base_cost: float = 1.0,
    shifts: bool = True,
    smoothing: str = "exp",
    per_record: bool = False,
) -> EvalReport:
    """Compute BLEU plus all terminology metrics over one evaluation set.

    Term metrics are reported as absent (None) when no pair is annotated;
    BLEU is always computed.  1-TERm aggregates as the unweighted mean of
    per-pair values.
    """
    if not pairs:
        raise DataError("empty corpus")
    bleu = bleu_corpus([p.hyp_tokens for p in pairs], [p.ref_tokens for p in pairs], smoothing)

    breakdown: list[dict] | None = [] if per_record else None
    if _count_terms(pairs) == 0:
        if breakdown is not None:
            breakdown.extend({"record_id": p.record_id} for p in pairs)
        return EvalReport(bleu=bleu, term_scores=None, per_record=breakdown)

    em_rate, em_details = exact_match(pairs)
    wo2_rate, wo2_details = window_overlap(pairs, 2, stopwords)
    wo3_rate, wo3_details = window_overlap(pairs, 3, stopwords)

    one_minus = []
    for pair in pairs:
        rate = term_edit_rate(
            pair.hyp_tokens,
            pair.ref_tokens,
            reference_term_positions(pair),
            term_cost=term_cost,
            base_cost=base_cost,
            shifts=shifts,
        )
        one_minus.append(1.0 - rate)

    if breakdown is not None:
        i = 0
        for pair, value in zip(pairs, one_minus):
            terms = []
            for _ in pair.annotations:
                terms.append(
                    {
                        "src_term": em_details[i]["src_term"],
                        "exact": em_details[i]["matched"],
                        "window_overlap_2": wo2_details[i]["score"],
                        "window_overlap_3": wo3_details[i]["score"],
                    }
                )
                i += 1
            breakdown.append(
                {"record_id": pair.record_id, "one_minus_term": value, "terms": terms}
            )

    scores = TermScores(
        exact_match=em_rate,
        window_overlap_2=wo2_rate,
        window_overlap_3=wo3_rate,
        one_minus_term=sum(one_minus) / len(one_minus),
        counts={
            "pairs": len(pairs),
            "terms": len(em_details),
            "correct_terms": sum(d["matched"] for d in em_details),
        },
    )
    return EvalReport(bleu=bleu, term_scores=scores, per_record=breakdown)


def load_stopwords(path: str | None = None, lang: str | None = None) -> frozenset[str]:
    """Stopwords from a one-token-per-line file, or the bundled en/zh lists."""
    if path is not None:
        with open(path, encoding="utf-8") as f:
            return frozenset(line.strip() for line in f if line.strip())
    if lang is None:
        return load_stopwords(lang="en") | load_stopwords(lang="zh")
    name = {"en": "stopwords_en.txt", "zh": "stopwords_zh.txt"}.get(lang)
    if name is None:
        raise ValueError(f"no bundled stopword list for {lang!r}")
    text = resources.files(__package__).joinpath(name).read_text(encoding="utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def _tokens(value, what: str, lineno: int) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(value.split())
    if isinstance(value, list) and all(isinstance(t, str) for t in value):
        return tuple(value)
    raise DataError(f"{what} must be a string or a list of tokens", line=lineno)


def load_annotations(stream: TextIO) -> dict[str, list[TermAnnotation]]:
    """Read annotation JSONL: {record_id, src_term, tgt_variants: [[tok,...],...]}."""
    by_record: dict[str, list[TermAnnotation]] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
        if not isinstance(obj, dict) or "record_id" not in obj or "tgt_variants" not in obj:
            raise DataError("expected an object with 'record_id' and 'tgt_variants'", line=lineno)
        variants = obj["tgt_variants"]
        if not isinstance(variants, list) or not variants:
            raise DataError("'tgt_variants' must be a non-empty list", line=lineno)
        try:
            ann = TermAnnotation(
                record_id=str(obj["record_id"]),
                src_term=_tokens(obj.get("src_term", []), "'src_term'", lineno),
                tgt_variants=tuple(_tokens(v, "variant", lineno) for v in variants),
            )
        except DataError as exc:
            raise DataError(str(exc), line=lineno) from None
        by_record.setdefault(ann.record_id, []).append(ann)
    return by_record


def load_eval_pairs(
    stream: TextIO,
    tokenizer: Callable[[str], list[str]],
    annotations: dict[str, list[TermAnnotation]] | None = None,
) -> list[EvalPair]:
    """Read evaluation JSONL: {record_id, hyp, ref}, tokenizing both sides."""
    annotations = annotations or {}
    pairs: list[EvalPair] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
        for key in ("record_id", "hyp", "ref"):
            if not isinstance(obj, dict) or key not in obj or not isinstance(obj[key], str):
                raise DataError(f"missing or non-string field {key!r}", line=lineno)
        rid = obj["record_id"]
        pairs.append(
            EvalPair(
                record_id=rid,
                hyp_tokens=tuple(tokenizer(obj["hyp"])),
                ref_tokens=tuple(tokenizer(obj["ref"])),
                annotations=tuple(annotations.get(rid, ())),
            )
        )
    return pairs
