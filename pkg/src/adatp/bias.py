"""Attention-bias metrics over dumps: where do the top-scoring tokens live?

Two effects are quantified per layer:
  * global end-concentration: the fraction of the top-q scored tokens that
    fall in the last (or first) k frames;
  * local position-concentration: how much the largest per-position column
    sum exceeds the mean column sum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .dump import AdtpDump
from .errors import InvariantViolation, ShapeMismatch


@dataclass(frozen=True)
class GlobalBias:
    top_count: int  # ceil(q * n * c)
    end_fraction: float  # top tokens with frame >= n - k
    head_fraction: float  # top tokens with frame < k


@dataclass(frozen=True)
class LocalBias:
    position_sum: np.ndarray  # (c,) float64
    peak_pos: int
    peak_ratio: float  # max position sum / mean position sum


def global_bias(scores: np.ndarray, n: int, c: int, q: float, k: int) -> GlobalBias:
    """Head/tail concentration of the top-q fraction of scores.

    Ties on the score boundary are broken by ascending flat index, so the
    result is deterministic even on degenerate (e.g. uniform) inputs.
    """
    scores = np.asarray(scores)
    if scores.shape != (n * c,):
        raise ShapeMismatch(f"expected {n * c} scores, got shape {scores.shape}")
    if not 0.0 < q <= 1.0:
        raise InvariantViolation(f"top fraction q must lie in (0, 1], got {q}")
    if not 1 <= k <= n:
        raise InvariantViolation(f"tail frame count k must lie in [1, {n}], got {k}")
    m = math.ceil(q * n * c)
    order = np.argsort(-scores.astype(np.float64), kind="stable")
    top_frames = order[:m] // c
    end = int(np.count_nonzero(top_frames >= n - k))
    head = int(np.count_nonzero(top_frames < k))
    return GlobalBias(top_count=m, end_fraction=end / m, head_fraction=head / m)


def local_bias(scores: np.ndarray, n: int, c: int) -> LocalBias:
    """Column sums over the n x c score grid and the peak-to-mean ratio."""
    scores = np.asarray(scores)
    if scores.shape != (n * c,):
        raise ShapeMismatch(f"expected {n * c} scores, got shape {scores.shape}")
    sums = scores.astype(np.float64).reshape(n, c).sum(axis=0)
    sums.flags.writeable = False
    mean = float(sums.mean())
    if mean == 0.0:
        return LocalBias(position_sum=sums, peak_pos=0, peak_ratio=1.0)
    peak = int(np.argmax(sums))
    return LocalBias(position_sum=sums, peak_pos=peak, peak_ratio=float(sums[peak]) / mean)


@dataclass(frozen=True)
class LayerBias:
    layer: int
    global_bias: GlobalBias
    local_bias: LocalBias
    frame_sum: np.ndarray  # (n,) float64, per-frame score mass


@dataclass(frozen=True)
class BiasReport:
    name: str
    n: int
    c: int
    top_q: float
    tail_k: int
    layers: tuple  # LayerBias per attention layer


def analyze_dump(
    dump: AdtpDump, top_q: float = 0.1, tail_k: int = 4, name: str = ""
) -> BiasReport:
    layers = []
    for layer in range(dump.num_layers):
        scores = dump.layer_scores(layer)
        g = global_bias(scores, dump.n, dump.c, top_q, tail_k)
        lo = local_bias(scores, dump.n, dump.c)
        frame_sum = scores.astype(np.float64).reshape(dump.n, dump.c).sum(axis=1)
        frame_sum.flags.writeable = False
        layers.append(LayerBias(layer=layer, global_bias=g, local_bias=lo, frame_sum=frame_sum))
    return BiasReport(
        name=name, n=dump.n, c=dump.c, top_q=top_q, tail_k=tail_k, layers=tuple(layers)
    )


CSV_HEADER = ("dump", "layer", "end_fraction", "head_fraction", "peak_ratio", "peak_pos")


def metrics_rows(reports: Sequence[BiasReport]) -> list:
    """Per-dump per-layer metric rows, plus corpus-mean rows when more than one dump.

    Mean rows average the three fraction/ratio columns across dumps; their
    peak position is the argmax of the summed position masses, which is both
    order-independent and meaningful (averaging indices would not be).
    """
    if not reports:
        raise InvariantViolation("no bias reports to tabulate")
    rows = []
    for rep in reports:
        for lb in rep.layers:
            rows.append(
                (
                    rep.name,
                    lb.layer,
                    lb.global_bias.end_fraction,
                    lb.global_bias.head_fraction,
                    lb.local_bias.peak_ratio,
                    lb.local_bias.peak_pos,
                )
            )
    if len(reports) > 1:
        num_layers = len(reports[0].layers)
        for rep in reports:
            if len(rep.layers) != num_layers:
                raise ShapeMismatch("corpus dumps disagree on layer count")
            if rep.c != reports[0].c:
                raise ShapeMismatch("corpus dumps disagree on tokens per frame")
        for li in range(num_layers):
            per = [rep.layers[li] for rep in reports]
            pos_total = np.sum([lb.local_bias.position_sum for lb in per], axis=0)
            rows.append(
                (
                    "mean",
                    li,
                    sum(lb.global_bias.end_fraction for lb in per) / len(per),
                    sum(lb.global_bias.head_fraction for lb in per) / len(per),
                    sum(lb.local_bias.peak_ratio for lb in per) / len(per),
                    int(np.argmax(pos_total)),
                )
            )
    return rows


def write_metrics_csv(reports: Sequence[BiasReport], fp: TextIO) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for name, layer, end, head, ratio, peak in metrics_rows(reports):
        w.writerow([name, layer, repr(float(end)), repr(float(head)), repr(float(ratio)), peak])


def write_position_grid_csv(position_sum: Iterable[float], grid_width: int, fp: TextIO) -> None:
    """Reshape the c position sums into rows of grid_width (row-major)."""
    values = [float(v) for v in position_sum]
    if grid_width < 1 or len(values) % grid_width != 0:
        raise ShapeMismatch(
            f"{len(values)} position sums do not reshape to width {grid_width}"
        )
    w = csv.writer(fp, lineterminator="\n")
    for row_start in range(0, len(values), grid_width):
        w.writerow([repr(v) for v in values[row_start : row_start + grid_width]])
