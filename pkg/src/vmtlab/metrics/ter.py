"""Terminology-biased translation edit rate.

Edits at reference positions covered by an annotated term cost ``term_cost``
while all other edits cost ``base_cost``.  Block shifts (a hypothesis block
that matches a reference substring moves to that reference position) cost
``base_cost`` each and are searched greedily: the single shift that most
reduces the weighted edit distance is applied until no shift improves it.
The greedy search is a heuristic; finding the true optimum over shift
sequences is exponential.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from ..errors import DataError

# Iteration cap for the greedy shift loop.
MAX_SHIFT_ITERATIONS = 20


def weighted_edit_cost(
    hyp: Sequence[str], ref: Sequence[str], weights: Sequence[float], base_cost: float
) -> float:
    """Weighted Levenshtein distance.

    Substitution and deletion at reference position j cost ``weights[j]``;
    insertion of a hypothesis token costs ``base_cost``.
    """
    m = len(ref)
    prev = [0.0] * (m + 1)
    for j in range(1, m + 1):
        prev[j] = prev[j - 1] + weights[j - 1]
    for token in hyp:
        cur = [prev[0] + base_cost] + [0.0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0.0 if token == ref[j - 1] else weights[j - 1])
            cur[j] = min(sub, prev[j] + base_cost, cur[j - 1] + weights[j - 1])
        prev = cur
    return prev[m]


def shift_candidates(hyp: Sequence[str], ref: Sequence[str]):
    """Yield (length, start_h, start_r, shifted) for every legal block shift.

    A block of the hypothesis may move only if it equals the reference
    substring at start_r; it is reinserted at that reference index within
    the remaining tokens.  Shifts that reproduce the input are skipped.
    """
    n, m = len(hyp), len(ref)
    for start_h in range(n):
        for start_r in range(m):
            length = 0
            while (
                start_h + length < n
                and start_r + length < m
                and hyp[start_h + length] == ref[start_r + length]
            ):
                length += 1
                rest = list(hyp[:start_h]) + list(hyp[start_h + length :])
                pos = min(start_r, len(rest))
                shifted = rest[:pos] + list(hyp[start_h : start_h + length]) + rest[pos:]
                if shifted != list(hyp):
                    yield length, start_h, start_r, shifted


def _greedy_shift_cost(
    hyp: Sequence[str],
    ref: Sequence[str],
    weights: Sequence[float],
    base_cost: float,
    cap: int = MAX_SHIFT_ITERATIONS,
) -> tuple[int, float]:
    """Returns (number of shifts applied, final weighted edit distance)."""
    cur = list(hyp)
    edits = weighted_edit_cost(cur, ref, weights, base_cost)
    shifts = 0
    for _ in range(cap):
        best_key = None
        best_seq = None
        cache: dict[tuple, float] = {}
        for length, start_h, start_r, cand in shift_candidates(cur, ref):
            seq = tuple(cand)
            cost = cache.get(seq)
            if cost is None:
                cost = weighted_edit_cost(cand, ref, weights, base_cost)
                cache[seq] = cost
            if cost >= edits:
                continue
            # Prefer the biggest reduction, then longer blocks, then the
            # leftmost origin and destination.
            key = (cost, -length, start_h, start_r)
            if best_key is None or key < best_key:
                best_key, best_seq = key, cand
        if best_seq is None:
            break
        cur, edits = best_seq, best_key[0]
        shifts += 1
    return shifts, edits


def term_weights(
    ref_len: int,
    term_positions: Iterable[int],
    term_cost: float = 2.0,
    base_cost: float = 1.0,
) -> list[float]:
    positions = set(term_positions)
    for pos in positions:
        if not 0 <= pos < ref_len:
            raise DataError(f"term position {pos} outside reference of length {ref_len}")
    return [term_cost if j in positions else base_cost for j in range(ref_len)]


def term_edit_rate(
    hyp_tokens: Sequence[str],
    ref_tokens: Sequence[str],
    term_token_positions: Iterable[int] = (),
    term_cost: float = 2.0,
    base_cost: float = 1.0,
    shifts: bool = True,
) -> float:
    """Weighted TER, normalized by the weighted reference length."""
    if len(ref_tokens) == 0:
        raise DataError("empty reference")
    weights = term_weights(len(ref_tokens), term_token_positions, term_cost, base_cost)
    normalizer = sum(weights)
    if shifts:
        n_shifts, edits = _greedy_shift_cost(hyp_tokens, ref_tokens, weights, base_cost)
        numerator = n_shifts * base_cost + edits
    else:
        numerator = weighted_edit_cost(hyp_tokens, ref_tokens, weights, base_cost)
    return numerator / normalizer
