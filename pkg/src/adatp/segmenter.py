"""Partition a frame sequence into contiguous segments by adjacent cosine similarity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, ZeroNormFrame, ZeroNormVector


@dataclass(frozen=True)
class Segment:
    """A maximal run of adjacent frames; segments tile [0, n) in order."""

    start: int
    length: int
    id: int

    @property
    def stop(self) -> int:
        return self.start + self.length

    def frames(self) -> range:
        return range(self.start, self.stop)


def cos_sim(a, b) -> float:
    """Cosine similarity, clamped to [-1, 1] against float overshoot."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormVector("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(float(av @ bv) / (na * nb), -1.0, 1.0))


def partition(frames, tau_s: float) -> list[Segment]:
    """Greedy left-to-right split: frame i+1 stays with frame i iff their
    cosine similarity is >= tau_s, else a new segment starts at i+1.
    """
    f = np.asarray(frames, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] == 0:
        raise EmptyInput("need at least one frame embedding")
    norms = np.linalg.norm(f, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormFrame(int(zero[0]))

    n = f.shape[0]
    starts = [0]
    for i in range(n - 1):
        sim = float(np.clip(float(f[i] @ f[i + 1]) / (norms[i] * norms[i + 1]), -1.0, 1.0))
        if sim < tau_s:
            starts.append(i + 1)
    starts.append(n)
    return [
        Segment(start=starts[j], length=starts[j + 1] - starts[j], id=j)
        for j in range(len(starts) - 1)
    ]
