"""Terminology-targeted and surface translation metrics."""

from .bleu import BleuReport, bleu_corpus
from .ter import term_edit_rate
from .terms import (
    EvalPair,
    TermAnnotation,
    TermScores,
    evaluate,
    exact_match,
    window_overlap,
)
from .tokenizers import tokenize, tokenize_zh

__all__ = [
    "BleuReport",
    "EvalPair",
    "TermAnnotation",
    "TermScores",
    "bleu_corpus",
    "evaluate",
    "exact_match",
    "term_edit_rate",
    "tokenize",
    "tokenize_zh",
    "window_overlap",
]
