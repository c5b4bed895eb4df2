"""Quality-estimation score ingestion and the keep/drop corpus filter.

The filter rule is deliberately small: a record is dropped only when more
than ``max_failures`` of its scores land on the wrong side of their
thresholds.  Real QE models live outside this package; scores arrive from
files or from two cheap documented heuristics.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, TextIO

from .corpus import CorpusRecord
from .errors import ConfigError, DataError

HIGHER = "higher-is-better"
LOWER = "lower-is-better"


@dataclass(frozen=True)
class ScorerSpec:
    name: str
    threshold: float
    orientation: str = HIGHER

    def __post_init__(self):
        if self.orientation not in (HIGHER, LOWER):
            raise ConfigError(f"unknown orientation {self.orientation!r}")

    def fails(self, score: float) -> bool:
        if self.orientation == HIGHER:
            return score < self.threshold
        return score > self.threshold


# The stock configuration: a COMET-style score, a sentence-embedding distance
# (a distance, so lower is better), and a round-trip BLEU.
DEFAULT_FILTER_SPECS = (
    ScorerSpec("comet", 0.1, HIGHER),
    ScorerSpec("embedding_distance", 4.0, LOWER),
    ScorerSpec("round_trip_bleu", 20.0, HIGHER),
)


def validate_specs(specs: Sequence[ScorerSpec], max_failures: float = 1) -> None:
    names = [s.name for s in specs]
    if len(names) != len(set(names)):
        raise ConfigError("scorer names must be unique within a filter configuration")
    if max_failures != math.inf and (not isinstance(max_failures, int) or max_failures < 0):
        raise ConfigError(f"max_failures must be a non-negative integer or inf, got {max_failures!r}")


def ingest_scores(
    records: Sequence[CorpusRecord], stream: TextIO, format: str | None = None
) -> tuple[list[CorpusRecord], list[str]]:
    """Attach named scores from a TSV or JSONL score file.

    Returns the updated records plus warnings for score-file ids that match
    no record.  Records absent from the file keep whatever scores they had;
    completeness is enforced later, at filter time.
    """
    by_id = {r.id: dict(r.scores or {}) for r in records}
    warnings: list[str] = []

    def add(rid: str, scorer: str, value: float, lineno: int) -> None:
        if rid not in by_id:
            warnings.append(f"line {lineno}: score for unknown record id {rid!r}")
            return
        by_id[rid][scorer] = value

    first = True
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        fmt = format
        if fmt is None:
            fmt = "jsonl" if line.lstrip().startswith("{") else "tsv"
        if fmt == "tsv":
            cols = line.split("\t")
            if first and cols[:3] == ["id", "scorer", "value"]:
                first = False
                continue
            first = False
            if len(cols) != 3:
                raise DataError(f"expected 3 tab-separated columns, got {len(cols)}", line=lineno)
            rid, scorer, value_s = cols
            try:
                value = float(value_s)
            except ValueError:
                raise DataError(f"malformed score value {value_s!r}", line=lineno) from None
            add(rid, scorer, value, lineno)
        elif fmt == "jsonl":
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
            if not isinstance(obj, dict) or "id" not in obj or "scores" not in obj:
                raise DataError("expected an object with 'id' and 'scores'", line=lineno)
            scores = obj["scores"]
            if not isinstance(scores, dict):
                raise DataError("'scores' must be an object", line=lineno)
            for scorer, value in scores.items():
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise DataError(f"score {scorer!r} is not a number", line=lineno)
                add(obj["id"], scorer, float(value), lineno)
        else:
            raise ValueError(f"unknown score file format: {fmt!r}")

    updated = [
        replace(r, scores=by_id[r.id] or None) if by_id[r.id] else r for r in records
    ]
    return updated, warnings


_LATIN_OR_DIGIT = re.compile(r"^[0-9A-Za-z]+$")


def heuristic_score(record: CorpusRecord, scorer: str) -> float:
    """Cheap reference-free stand-ins for external QE models.

    length_ratio compares source token count against target character count
    (suits a Chinese target).  lexical_overlap is the Jaccard overlap of
    copy-through tokens (digits and latin words) between the two sides.
    """
    src, tgt = record.src.strip(), record.tgt.strip()
    if not src or not tgt:
        return 0.0
    if scorer == "length_ratio":
        a = len(src.split())
        b = len(tgt.replace(" ", ""))
        if a == 0 or b == 0:
            return 0.0
        return min(a, b) / max(a, b)
    if scorer == "lexical_overlap":
        src_tokens = {t for t in src.split() if _LATIN_OR_DIGIT.match(t)}
        tgt_tokens = {t for t in re.findall(r"[0-9A-Za-z]+", tgt)}
        union = src_tokens | tgt_tokens
        return len(src_tokens & tgt_tokens) / max(1, len(union))
    raise ValueError(f"unknown heuristic scorer: {scorer!r}")


def apply_filter(
    score_vector: dict[str, float],
    specs: Sequence[ScorerSpec] = DEFAULT_FILTER_SPECS,
    max_failures: float = 1,
) -> tuple[str, list[str]]:
    """Evaluate one score vector. Returns ("keep"|"drop", failing scorer names)."""
    validate_specs(specs, max_failures)
    failing = []
    for spec in specs:
        if spec.name not in score_vector:
            raise DataError(f"score vector lacks the {spec.name!r} entry")
        if spec.fails(score_vector[spec.name]):
            failing.append(spec.name)
    decision = "drop" if len(failing) > max_failures else "keep"
    return decision, failing


def filter_corpus(
    records: Iterable[CorpusRecord],
    specs: Sequence[ScorerSpec] = DEFAULT_FILTER_SPECS,
    max_failures: float = 1,
) -> tuple[list[CorpusRecord], list[dict]]:
    """Apply the filter to every record.

    Returns (kept records, drop report).  A record without a complete score
    vector is an error naming the record: filtering silently on partial
    evidence would defeat the rule.
    """
    validate_specs(specs, max_failures)
    kept: list[CorpusRecord] = []
    dropped: list[dict] = []
    for record in records:
        if not record.scores:
            raise DataError(f"record {record.id!r} has no scores at filter time")
        for spec in specs:
            if spec.name not in record.scores:
                raise DataError(f"record {record.id!r} lacks the {spec.name!r} score")
        decision, failing = apply_filter(record.scores, specs, max_failures)
        if decision == "keep":
            kept.append(record)
        else:
            dropped.append({"id": record.id, "failing": failing})
    return kept, dropped
