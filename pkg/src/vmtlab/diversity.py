"""Corpus diversity measures: n-gram profiles, POS-tag profiles, and the
group-and-vote category labeler."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .corpus import CorpusRecord
from .errors import DataError

POS_TAGS = ("verb", "noun", "adjective", "adverb")

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


def normalize_tokens(text: str, lowercase: bool = True, strip_punct: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    if strip_punct:
        text = _PUNCT.sub(" ", text)
    return text.split()


@dataclass
class NgramProfile:
    """Per-order n-gram counts, kept as counters so shards can be merged."""

    n_max: int = 4
    counters: dict[int, Counter] = field(default_factory=dict)

    def __post_init__(self):
        for n in range(1, self.n_max + 1):
            self.counters.setdefault(n, Counter())

    def add_tokens(self, tokens: Sequence[str]) -> None:
        for n in range(1, self.n_max + 1):
            counter = self.counters[n]
            for i in range(len(tokens) - n + 1):
                counter[tuple(tokens[i : i + n])] += 1

    def unique_count(self, n: int) -> int:
        return len(self.counters[n])

    def total_count(self, n: int) -> int:
        return sum(self.counters[n].values())

    def merge(self, other: "NgramProfile") -> "NgramProfile":
        if other.n_max != self.n_max:
            raise ValueError("cannot merge profiles with different n_max")
        merged = NgramProfile(self.n_max)
        for n in range(1, self.n_max + 1):
            merged.counters[n] = self.counters[n] + other.counters[n]
        return merged

    def report(self) -> dict:
        return {
            str(n): {"unique": self.unique_count(n), "total": self.total_count(n)}
            for n in range(1, self.n_max + 1)
        }


def ngram_profile(
    texts: Iterable[str],
    n_max: int = 4,
    lowercase: bool = True,
    strip_punct: bool = True,
) -> NgramProfile:
    """Count unique and total n-grams over whitespace tokens, n = 1..n_max."""
    profile = NgramProfile(n_max)
    for text in texts:
        profile.add_tokens(normalize_tokens(text, lowercase, strip_punct))
    return profile


# A deliberately small lexicon; real corpora should plug in a proper tagger.
_STUB_LEXICON = {
    "run": "verb", "go": "verb", "see": "verb", "buy": "verb", "eat": "verb",
    "make": "verb", "take": "verb", "say": "verb", "know": "verb", "want": "verb",
    "dog": "noun", "cat": "noun", "man": "noun", "woman": "noun", "house": "noun",
    "car": "noun", "day": "noun", "time": "noun", "water": "noun", "film": "noun",
    "quick": "adjective", "big": "adjective", "small": "adjective", "good": "adjective",
    "bad": "adjective", "new": "adjective", "old": "adjective", "happy": "adjective",
    "quickly": "adverb", "slowly": "adverb", "very": "adverb", "well": "adverb",
    "never": "adverb", "always": "adverb", "again": "adverb", "now": "adverb",
}


def lexicon_tagger(token: str) -> str:
    return _STUB_LEXICON.get(token, "other")


def pos_profile(
    texts: Iterable[str],
    tagger: Callable[[str], str] = lexicon_tagger,
    lowercase: bool = True,
    strip_punct: bool = True,
) -> dict[str, int]:
    """Unique word types per target POS tag; tags outside the set are ignored."""
    types: dict[str, set] = {tag: set() for tag in POS_TAGS}
    for text in texts:
        for token in normalize_tokens(text, lowercase, strip_punct):
            tag = tagger(token)
            if tag in types:
                types[tag].add(token)
    return {tag: len(types[tag]) for tag in POS_TAGS}


@dataclass(frozen=True)
class CategoryVote:
    group_size: int
    group_labels: tuple[str, ...]
    winner: str


def vote_category(
    records: Sequence[CorpusRecord],
    labeler: Callable[[list[str]], str],
    group_size: int = 5,
) -> CategoryVote:
    """Label consecutive groups of subtitles and return the majority label.

    Ties go to the label whose group appears earliest.  The labeler receives
    the source texts of one group.
    """
    if not records:
        raise DataError("no subtitles")
    if group_size < 1:
        raise ValueError("group_size must be positive")
    labels: list[str] = []
    for i in range(0, len(records), group_size):
        group = [r.src for r in records[i : i + group_size]]
        labels.append(labeler(group))
    counts = Counter(labels)
    top = max(counts.values())
    winner = next(label for label in labels if counts[label] == top)
    return CategoryVote(group_size=group_size, group_labels=tuple(labels), winner=winner)
