"""Greedy score-ordered spatial deduplication within one segment.

Tokens are scanned in descending score order (ties: ascending frame, then
ascending spatial index) and a token is kept iff its spatial position has not
been kept yet, so at most one token survives per position.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

from .dump import TokenId
from .errors import InvariantViolation


class ScoredToken(NamedTuple):
    id: TokenId
    score: float


def scan_order(t: ScoredToken):
    """Sort key: descending score, ties by ascending frame then spatial index."""
    return (-t.score, t.id.frame, t.id.pos)


def dedup(
    tokens: Iterable[ScoredToken],
    exempt_positions: frozenset[int] = frozenset(),
) -> list[ScoredToken]:
    """Return the kept tokens in scan order.

    Positions in ``exempt_positions`` (non-spatial tokens such as per-frame
    newline markers, when the exempt policy is enabled) bypass the uniqueness
    check and are always kept.
    """
    toks = list(tokens)
    for t in toks:
        if not math.isfinite(t.score) or t.score < 0.0:
            raise InvariantViolation(f"token score must be finite and >= 0, got {t.score}")

    kept: list[ScoredToken] = []
    used: set[int] = set()
    for t in sorted(toks, key=scan_order):
        if t.id.pos in exempt_positions:
            kept.append(t)
        elif t.id.pos not in used:
            kept.append(t)
            used.add(t.id.pos)
    return kept
