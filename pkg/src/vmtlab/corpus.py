"""Subtitle-to-parallel-corpus pipeline.

Timed bilingual chunks are merged into sentences at punctuation or timing
breaks, packed into bounded-duration segments, and paired with the video clip
interval covering them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .errors import DataError

# Sentence terminators: ASCII, ellipsis, and the usual full-width forms.
DEFAULT_END_MARKS = frozenset(".!?…。！？．")

SPLITS = ("train", "valid", "test-ambiguous", "test-unambiguous")

_TIMESTAMP = re.compile(
    r"^(\d{1,2}):(\d{2}):(\d{2})[.,](\d{3})\s*-->\s*(\d{1,2}):(\d{2}):(\d{2})[.,](\d{3})\s*$"
)


@dataclass(frozen=True)
class TimedChunk:
    """One subtitle entry: a time span with one source and one target line."""

    index: int
    start_ms: int
    end_ms: int
    src_text: str
    tgt_text: str


@dataclass(frozen=True)
class Sentence:
    start_ms: int
    end_ms: int
    src_text: str
    tgt_text: str
    chunk_indices: tuple[int, ...]
    # True when the sentence was closed by a timing gap or end of stream
    # rather than by an end mark.
    forced_break: bool


@dataclass(frozen=True)
class Segment:
    start_ms: int
    end_ms: int
    src_text: str
    tgt_text: str
    sentence_count: int


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    video_id: str
    clip_start_ms: int
    clip_end_ms: int
    src: str
    tgt: str
    scores: dict[str, float] | None = None
    category: str | None = None
    split: str = "train"


@dataclass
class ParseResult:
    chunks: list[TimedChunk] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    # uniform per-file video id when the format carries one (TSV), else None
    video_id: str | None = None


def _parse_timestamp_line(line: str, lineno: int) -> tuple[int, int]:
    m = _TIMESTAMP.match(line.strip())
    if m is None:
        raise DataError(f"malformed timestamp line: {line.strip()!r}", line=lineno)
    h1, m1, s1, ms1, h2, m2, s2, ms2 = (int(g) for g in m.groups())
    start = ((h1 * 60 + m1) * 60 + s1) * 1000 + ms1
    end = ((h2 * 60 + m2) * 60 + s2) * 1000 + ms2
    return start, end


def _parse_srt_like(stream: TextIO) -> ParseResult:
    result = ParseResult()
    # Collect (lineno, line) blocks separated by blank lines.
    block: list[tuple[int, str]] = []
    blocks: list[list[tuple[int, str]]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if line.strip() == "":
            if block:
                blocks.append(block)
                block = []
        else:
            block.append((lineno, line))
    if block:
        blocks.append(block)

    index = 0
    for entry in blocks:
        first_lineno = entry[0][0]
        # Optional numeric index line before the timestamp line.
        body = entry
        if len(body) >= 2 and body[0][1].strip().isdigit() and "-->" in body[1][1]:
            body = body[1:]
        if not body or "-->" not in body[0][1]:
            raise DataError("entry without a timestamp line", line=first_lineno)
        ts_lineno, ts_line = body[0]
        start, end = _parse_timestamp_line(ts_line, ts_lineno)
        if end < start:
            raise DataError(
                f"entry ends before it starts ({start} > {end})", line=ts_lineno
            )
        text_lines = [text.strip() for _, text in body[1:]]
        if len(text_lines) < 2:
            result.warnings.append(
                f"line {first_lineno}: entry has {len(text_lines)} text line(s),"
                " expected source and target; skipped"
            )
            continue
        # First line is the source, the remainder joins into the target.
        src = text_lines[0]
        tgt = " ".join(text_lines[1:]) if len(text_lines) > 2 else text_lines[1]
        result.chunks.append(TimedChunk(index, start, end, src, tgt))
        index += 1
    return result


def _parse_tsv(stream: TextIO) -> ParseResult:
    result = ParseResult()
    index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if line.strip() == "":
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise DataError(f"expected 5 tab-separated columns, got {len(cols)}", line=lineno)
        start_s, end_s, src, tgt, video_id = cols
        try:
            start, end = int(start_s), int(end_s)
        except ValueError:
            raise DataError(f"malformed timestamp: {start_s!r}/{end_s!r}", line=lineno) from None
        if end < start:
            raise DataError(f"entry ends before it starts ({start} > {end})", line=lineno)
        if not src.strip() or not tgt.strip():
            result.warnings.append(f"line {lineno}: missing source or target text; skipped")
            continue
        if result.video_id is None:
            result.video_id = video_id
        elif result.video_id != video_id:
            raise DataError(
                f"mixed video ids in one stream: {result.video_id!r} vs {video_id!r}",
                line=lineno,
            )
        result.chunks.append(TimedChunk(index, start, end, src.strip(), tgt.strip()))
        index += 1
    return result


def parse_chunks(stream: TextIO, format: str = "srt-like") -> ParseResult:
    """Parse a subtitle stream into TimedChunks.

    ``format`` is "srt-like" (index line, timestamp line, source line, target
    line, blank separator) or "tsv" (start_ms, end_ms, src, tgt, video_id).
    Entries missing one of the two language lines are skipped and counted in
    ``warnings``; structural problems raise DataError with a line number.
    """
    if format == "srt-like":
        result = _parse_srt_like(stream)
    elif format == "tsv":
        result = _parse_tsv(stream)
    else:
        raise ValueError(f"unknown chunk format: {format!r}")
    # File-order invariant: chunks must already be sorted by start time.
    for prev, cur in zip(result.chunks, result.chunks[1:]):
        if cur.start_ms < prev.start_ms:
            raise DataError(
                f"chunks out of order: {cur.start_ms} after {prev.start_ms}"
            )
    return result


def ends_with_mark(text: str, end_marks: frozenset[str] = DEFAULT_END_MARKS) -> bool:
    stripped = text.rstrip()
    return bool(stripped) and stripped[-1] in end_marks


def merge_into_sentences(
    chunks: Sequence[TimedChunk],
    gap_ms: int = 500,
    end_marks: frozenset[str] = DEFAULT_END_MARKS,
) -> list[Sentence]:
    """Greedily merge consecutive chunks into sentences.

    A sentence keeps absorbing the next chunk while the accumulated source
    text does not yet end with an end mark and the gap to the next chunk is
    at most ``gap_ms``.  Source parts join with a single space, target parts
    concatenate directly.
    """
    sentences: list[Sentence] = []
    buf: list[TimedChunk] = []

    def flush(forced: bool) -> None:
        if not buf:
            return
        sentences.append(
            Sentence(
                start_ms=buf[0].start_ms,
                end_ms=buf[-1].end_ms,
                src_text=" ".join(c.src_text for c in buf),
                tgt_text="".join(c.tgt_text for c in buf),
                chunk_indices=tuple(c.index for c in buf),
                forced_break=forced,
            )
        )
        buf.clear()

    for pos, chunk in enumerate(chunks):
        buf.append(chunk)
        if ends_with_mark(chunk.src_text, end_marks):
            flush(forced=False)
        elif pos + 1 < len(chunks) and chunks[pos + 1].start_ms - chunk.end_ms > gap_ms:
            flush(forced=True)
    flush(forced=True)  # stream ended mid-sentence
    return sentences


def pack_segments(
    sentences: Sequence[Sentence],
    max_duration_ms: int = 15000,
    pack_gap_ms: int = 500,
) -> list[Segment]:
    """Pack adjacent sentences into segments of bounded duration.

    A sentence joins the open segment while the widened span stays within
    ``max_duration_ms`` and the gap to the previous sentence is at most
    ``pack_gap_ms``.  A single sentence longer than the limit is kept whole.
    """
    segments: list[Segment] = []
    group: list[Sentence] = []

    def flush() -> None:
        if not group:
            return
        segments.append(
            Segment(
                start_ms=group[0].start_ms,
                end_ms=group[-1].end_ms,
                src_text=" ".join(s.src_text for s in group),
                tgt_text="".join(s.tgt_text for s in group),
                sentence_count=len(group),
            )
        )
        group.clear()

    for sentence in sentences:
        if group:
            gap = sentence.start_ms - group[-1].end_ms
            span = sentence.end_ms - group[0].start_ms
            if gap > pack_gap_ms or span > max_duration_ms:
                flush()
        group.append(sentence)
    flush()
    return segments


def attach_clips(segments: Sequence[Segment], video_id: str) -> list[CorpusRecord]:
    """Pair each segment with its clip interval under a deterministic id."""
    if not video_id:
        raise ValueError("video_id must be non-empty")
    return [
        CorpusRecord(
            id=f"{video_id}#{ordinal:06d}",
            video_id=video_id,
            clip_start_ms=seg.start_ms,
            clip_end_ms=seg.end_ms,
            src=seg.src_text,
            tgt=seg.tgt_text,
        )
        for ordinal, seg in enumerate(segments)
    ]


def record_to_dict(record: CorpusRecord) -> dict:
    out: dict = {
        "id": record.id,
        "video_id": record.video_id,
        "clip_start_ms": record.clip_start_ms,
        "clip_end_ms": record.clip_end_ms,
        "src": record.src,
        "tgt": record.tgt,
    }
    if record.scores is not None:
        out["scores"] = {k: record.scores[k] for k in sorted(record.scores)}
    if record.category is not None:
        out["category"] = record.category
    out["split"] = record.split
    return out


def write_corpus(records: Iterable[CorpusRecord], stream: TextIO) -> None:
    """Serialize records as UTF-8 JSONL with LF line endings."""
    for record in records:
        stream.write(json.dumps(record_to_dict(record), ensure_ascii=False))
        stream.write("\n")


def _require(obj: dict, key: str, types, lineno: int):
    if key not in obj:
        raise DataError(f"missing field {key!r}", line=lineno)
    value = obj[key]
    if not isinstance(value, types):
        raise DataError(f"field {key!r} has wrong type {type(value).__name__}", line=lineno)
    return value


def read_corpus(stream: TextIO) -> list[CorpusRecord]:
    """Read a JSONL corpus, validating the schema line by line."""
    records: list[CorpusRecord] = []
    seen_ids: set[str] = set()
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
        if not isinstance(obj, dict):
            raise DataError("record is not a JSON object", line=lineno)
        rid = _require(obj, "id", str, lineno)
        video_id = _require(obj, "video_id", str, lineno)
        start = _require(obj, "clip_start_ms", int, lineno)
        end = _require(obj, "clip_end_ms", int, lineno)
        src = _require(obj, "src", str, lineno)
        tgt = _require(obj, "tgt", str, lineno)
        split = _require(obj, "split", str, lineno)
        if isinstance(start, bool) or isinstance(end, bool):
            raise DataError("clip interval must be integer milliseconds", line=lineno)
        if end < start:
            raise DataError(f"clip ends before it starts ({start} > {end})", line=lineno)
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}", line=lineno)
        if rid in seen_ids:
            raise DataError(f"duplicate record id {rid!r}", line=lineno)
        seen_ids.add(rid)
        scores = obj.get("scores")
        if scores is not None:
            if not isinstance(scores, dict) or not all(
                isinstance(k, str) and isinstance(v, (int, float)) and not isinstance(v, bool)
                for k, v in scores.items()
            ):
                raise DataError("field 'scores' must map scorer names to numbers", line=lineno)
            scores = {k: float(v) for k, v in scores.items()}
        category = obj.get("category")
        if category is not None and not isinstance(category, str):
            raise DataError("field 'category' must be a string", line=lineno)
        records.append(
            CorpusRecord(
                id=rid,
                video_id=video_id,
                clip_start_ms=start,
                clip_end_ms=end,
                src=src,
                tgt=tgt,
                scores=scores,
                category=category,
                split=split,
            )
        )
    return records


def build_corpus(
    stream: TextIO,
    format: str = "srt-like",
    video_id: str | None = None,
    gap_ms: int = 500,
    max_duration_ms: int = 15000,
    pack_gap_ms: int = 500,
    end_marks: frozenset[str] = DEFAULT_END_MARKS,
) -> tuple[list[CorpusRecord], list[str]]:
    """Run the full pipeline over one subtitle stream.

    Returns the records and any parse warnings.  ``video_id`` is required for
    formats that do not carry one.
    """
    parsed = parse_chunks(stream, format=format)
    vid = video_id or parsed.video_id
    if not vid:
        raise DataError("no video id: pass one explicitly for this format")
    sentences = merge_into_sentences(parsed.chunks, gap_ms=gap_ms, end_marks=end_marks)
    segments = pack_segments(
        sentences, max_duration_ms=max_duration_ms, pack_gap_ms=pack_gap_ms
    )
    return attach_clips(segments, vid), parsed.warnings
