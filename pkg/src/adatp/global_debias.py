"""Text-relevance scoring of segments and the boosted retention-ratio split.

Significant segments (mean frame-text cosine above tau_t) receive the boosted
ratio r1 = min(alpha_boost, n / sum_sig * gamma_cap) * r; the rest receive the
r2 that preserves the overall token budget exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AdaTPConfig
from .dump import AdtpDump
from .errors import InvariantViolation
from .segmenter import Segment, cos_sim


@dataclass(frozen=True)
class FrameRelevance:
    """Per-frame cosine similarity between the frame embedding and the text embedding."""

    sims: np.ndarray  # (n,) float64 in [-1, 1]

    def segment_mean(self, seg: Segment) -> float:
        return float(self.sims[seg.start : seg.stop].mean())


def frame_relevance(dump: AdtpDump) -> FrameRelevance:
    sims = np.empty(dump.n, dtype=np.float64)
    for i in range(dump.n):
        sims[i] = cos_sim(dump.frame_embeddings[i], dump.text_embedding)
    sims.flags.writeable = False
    return FrameRelevance(sims=sims)


def select_significant(rel: FrameRelevance, segs: list[Segment], tau_t: float) -> list[bool]:
    """A segment is significant iff its mean frame relevance strictly exceeds tau_t."""
    if sum(s.length for s in segs) != rel.sims.shape[0]:
        raise InvariantViolation("segments do not cover the relevance vector")
    return [rel.segment_mean(s) > tau_t for s in segs]


@dataclass(frozen=True)
class RetentionPlan:
    """Per-segment retention ratios and integer token budgets for one pruning layer.

    r1/r2 are the post-clamp ratios actually used for budgets; r1_raw/r2_raw
    are the unclamped solutions of the allocation formulas, which satisfy
    r1_raw*sum_sig + r2_raw*sum_plain == r*n exactly. A ratio is None in the
    degenerate direction that has no segments. When clamping to 1.0 leaves
    part of the budget unplaceable, the gap is recorded in shortfall_tokens.
    """

    r: float
    r1: float | None
    r2: float | None
    r1_raw: float | None
    r2_raw: float | None
    significant: tuple[bool, ...]
    budget_per_segment: tuple[int, ...]
    shortfall_tokens: float
    boost_limited_by: str | None  # "alpha" | "cap" | None (degenerate cases)

    def ratio_for(self, seg_index: int) -> float:
        if self.significant[seg_index]:
            assert self.r1 is not None
            return self.r1
        assert self.r2 is not None
        return self.r2

    @property
    def total_budget(self) -> int:
        return sum(self.budget_per_segment)


def allocate(
    segs: list[Segment],
    flags: list[bool] | tuple[bool, ...],
    cfg: AdaTPConfig,
    r: float,
    c: int,
) -> RetentionPlan:
    """Split the layer retention ratio r into r1 (significant) and r2 (other).

    Scalar arithmetic is plain Python float so results are reproducible
    expression-for-expression.
    """
    if not segs:
        raise InvariantViolation("allocate needs at least one segment")
    if len(flags) != len(segs):
        raise InvariantViolation("one significance flag per segment required")
    if not 0.0 < r <= 1.0:
        raise InvariantViolation(f"retention ratio r must lie in (0, 1], got {r}")

    n = sum(s.length for s in segs)
    sum_sig = sum(s.length for s, f in zip(segs, flags) if f)
    sum_plain = n - sum_sig

    shortfall = 0.0
    limited_by: str | None = None
    if sum_sig == 0:
        r1 = r1_raw = None
        r2 = r2_raw = r
    elif sum_plain == 0:
        # Boosting is impossible when every segment is significant; the literal
        # formula would under-retain, so the plain ratio is used instead.
        r1 = r1_raw = r
        r2 = r2_raw = None
    else:
        alpha_branch = cfg.alpha_boost
        cap_branch = n / sum_sig * cfg.gamma_cap
        limited_by = "alpha" if alpha_branch <= cap_branch else "cap"
        r1_raw = min(alpha_branch, cap_branch) * r
        r2_raw = (r * n - r1_raw * sum_sig) / sum_plain
        r1, r2 = r1_raw, r2_raw
        if r1 > 1.0:
            # Ratios are physical fractions of existing tokens; preserve the
            # total by re-solving for r2 at r1 = 1.
            r1 = 1.0
            r2 = (r * n - 1.0 * sum_sig) / sum_plain
        if r2 > 1.0:
            shortfall = (r * n - r1 * sum_sig - 1.0 * sum_plain) * c
            r2 = 1.0

    budgets = []
    for seg, sig in zip(segs, flags):
        ratio = r1 if sig else r2
        assert ratio is not None
        budgets.append(max(1, math.floor(ratio * seg.length * c)))

    return RetentionPlan(
        r=r,
        r1=r1,
        r2=r2,
        r1_raw=r1_raw,
        r2_raw=r2_raw,
        significant=tuple(bool(f) for f in flags),
        budget_per_segment=tuple(budgets),
        shortfall_tokens=shortfall,
        boost_limited_by=limited_by,
    )
