"""Synthetic dump generator with planted ground truth, plus baseline pruners.

The generator builds attention scores in additive tiers so every knob is
independently measurable:

  base noise  U[0.1, 0.4)          every token, fresh per layer
  +beta       planted set R        the "answer-critical" tokens
  shoulder    last k frames        generic end-of-sequence heat (only if g>0)
  top tier    ceil(q*n*c) tokens   strictly above everything else; a round(g*T)
                                   share sits in the last k frames, the rest in
                                   the first k, so the measured top-q end
                                   fraction equals the planted g exactly
  column lift positions P          closed-form additive lift making each lifted
                                   column sum exactly lambda times the column
                                   mean, spread evenly over the column's frames

Scores are optionally normalized to unit sum (scale changes nothing measured
here) and cast to float32. Embeddings get one near-orthonormal base vector per
segment; the text embedding is aligned with the segments containing R and
orthogonal to the rest. Every planted property is re-measured on the finished
dump and a mismatch raises InfeasibleSpec instead of silently shipping a
corpus that does not exhibit what it claims.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from . import flops as _flops
from .bias import global_bias, local_bias
from .config import AdaTPConfig
from .dump import AdtpDump, read_dump_file
from .errors import InfeasibleSpec, InvariantViolation
from .global_debias import frame_relevance, select_significant
from .pipeline import run as run_pipeline
from .segmenter import partition

SHOULDER_MARGIN = 0.45  # keeps the end-frame shoulder strictly above the R tier
TIER_GAP = 0.2


@dataclass(frozen=True)
class SynthSpec:
    n: int = 32
    c: int = 196
    d: int = 128
    num_layers: int = 24
    segment_lengths: tuple = (4, 4, 4, 4, 4, 4, 4, 4)
    planted: tuple = ()  # flat token indices of R
    beta: float = 1.0  # score bonus on R
    end_mass: float = 0.0  # g: share of the top tier placed in the last k frames
    tail_frames: int = 4  # k
    peak_positions: tuple = ()  # P: spatial columns to lift
    peak_multiplier: float = 1.0  # lambda
    alignment: float = 0.5  # text cosine against relevant segment bases
    intra_noise: float = 0.05
    inter_sim: float = 0.0  # cosine between adjacent segment bases
    bias_top_q: float = 0.1  # tier size as a fraction of n*c
    tau_s_target: float = 0.95
    tau_t_target: float = 0.05
    normalize: bool = True
    seed: int = 0

    def validate(self) -> "SynthSpec":
        if min(self.n, self.c, self.d, self.num_layers) < 1:
            raise InvariantViolation("n, c, d, num_layers must all be >= 1")
        if not self.segment_lengths or any(s < 1 for s in self.segment_lengths):
            raise InvariantViolation("segment lengths must be positive")
        if sum(self.segment_lengths) != self.n:
            raise InvariantViolation(
                f"segment lengths sum to {sum(self.segment_lengths)}, expected n={self.n}"
            )
        if not self.planted:
            raise InvariantViolation("planted token set must be nonempty")
        if len(set(self.planted)) != len(self.planted):
            raise InvariantViolation("planted token indices must be distinct")
        if min(self.planted) < 0 or max(self.planted) >= self.n * self.c:
            raise InvariantViolation("planted token index out of range")
        if self.beta < 0:
            raise InvariantViolation("beta must be >= 0")
        if not 0.0 <= self.end_mass < 1.0:
            raise InvariantViolation(f"end mass g must lie in [0, 1), got {self.end_mass}")
        if not 1 <= self.tail_frames <= self.n:
            raise InvariantViolation("tail frame count must lie in [1, n]")
        if self.peak_multiplier < 1.0:
            raise InvariantViolation("peak multiplier lambda must be >= 1")
        if len(set(self.peak_positions)) != len(self.peak_positions):
            raise InvariantViolation("peak positions must be distinct")
        if self.peak_positions and (
            min(self.peak_positions) < 0 or max(self.peak_positions) >= self.c
        ):
            raise InvariantViolation("peak position out of range")
        if not 0.0 < self.bias_top_q <= 1.0:
            raise InvariantViolation("bias_top_q must lie in (0, 1]")
        if not 0.0 <= self.inter_sim < 1.0:
            raise InvariantViolation("inter-segment similarity must lie in [0, 1)")
        if self.intra_noise < 0.0:
            raise InvariantViolation("intra-segment noise must be >= 0")
        if not 0.0 < self.alignment < 1.0:
            raise InvariantViolation("alignment must lie in (0, 1)")
        return self


def _segment_starts(lengths: Sequence[int]) -> list:
    starts, acc = [], 0
    for ln in lengths:
        starts.append(acc)
        acc += ln
    return starts


def _relevant_segments(spec: SynthSpec) -> list:
    """Indices of segments containing at least one planted token's frame."""
    starts = _segment_starts(spec.segment_lengths)
    rel = set()
    for flat in spec.planted:
        frame = flat // spec.c
        for j, (start, ln) in enumerate(zip(starts, spec.segment_lengths)):
            if start <= frame < start + ln:
                rel.add(j)
                break
    return sorted(rel)


def _build_embeddings(spec: SynthSpec, rng: np.random.Generator):
    num_segs = len(spec.segment_lengths)
    if spec.d < num_segs + 1:
        raise InfeasibleSpec(
            f"embedding dim {spec.d} cannot host {num_segs} orthogonal segment bases"
        )
    raw = rng.standard_normal((spec.d, num_segs + 1))
    q, _ = np.linalg.qr(raw)
    bases = [q[:, j] for j in range(num_segs)]
    spare = q[:, num_segs]
    if spec.inter_sim > 0.0:
        mixed = [bases[0]]
        w = math.sqrt(1.0 - spec.inter_sim**2)
        for j in range(1, num_segs):
            mixed.append(spec.inter_sim * mixed[-1] + w * bases[j])
        bases = mixed

    rel = _relevant_segments(spec)
    a = spec.alignment
    if len(rel) * a * a >= 1.0:
        raise InfeasibleSpec(
            f"alignment {a} across {len(rel)} relevant segments exceeds the unit sphere"
        )
    text = sum((a * bases[j] for j in rel), np.zeros(spec.d))
    text = text + math.sqrt(1.0 - len(rel) * a * a) * spare
    text = text / np.linalg.norm(text)

    frames = np.empty((spec.n, spec.d), dtype=np.float64)
    starts = _segment_starts(spec.segment_lengths)
    for j, (start, ln) in enumerate(zip(starts, spec.segment_lengths)):
        for i in range(start, start + ln):
            eps = rng.standard_normal(spec.d)
            eps /= np.linalg.norm(eps)
            v = bases[j] + spec.intra_noise * eps
            frames[i] = v / np.linalg.norm(v)
    return frames, text, rel


def _pick_top_tier(spec: SynthSpec, rng: np.random.Generator):
    """Choose the flat indices of the top tier: round(g*T) in the last k frames."""
    n, c, k = spec.n, spec.c, spec.tail_frames
    tier_size = math.ceil(spec.bias_top_q * n * c)
    count_last = int(math.floor(spec.end_mass * tier_size + 0.5))
    count_first = tier_size - count_last
    planted = set(spec.planted)
    last = [f * c + p for f in range(n - k, n) for p in range(c) if f * c + p not in planted]
    first = [f * c + p for f in range(k) for p in range(c) if f * c + p not in planted]
    if count_last > len(last) or count_first > len(first):
        raise InfeasibleSpec(
            f"top tier needs {count_last} end slots and {count_first} head slots; "
            f"only {len(last)}/{len(first)} are free of planted tokens"
        )
    chosen_last = rng.choice(np.array(last, dtype=np.int64), size=count_last, replace=False)
    chosen_first = rng.choice(np.array(first, dtype=np.int64), size=count_first, replace=False)
    return np.concatenate([chosen_last, chosen_first]), tier_size, count_last


def _lift_columns(scores: np.ndarray, n: int, c: int, positions, lam: float) -> np.ndarray:
    """Additively lift each column in ``positions`` so its sum is exactly
    lam times the (new) mean column sum, spreading the lift evenly over frames."""
    grid = scores.reshape(n, c)
    sums = grid.sum(axis=0)
    kappa = len(positions)
    denom = c - kappa * lam
    if denom <= 0:
        raise InfeasibleSpec(
            f"cannot make {kappa} columns {lam}x the mean with only c={c} columns"
        )
    total = float(sums.sum())
    s_p = float(sums[list(positions)].sum())
    extra_total = (kappa * lam * total - c * s_p) / denom
    target = lam * (total + extra_total) / c
    out = grid.copy()
    for p in positions:
        x = target - float(sums[p])
        if x < -1e-9:
            raise InfeasibleSpec(
                f"column {p} already exceeds the lambda={lam} target; lower other tiers"
            )
        out[:, p] += max(0.0, x) / n
    return out.reshape(-1)


def _build_layer_scores(spec: SynthSpec, rng: np.random.Generator, tier_idx) -> np.ndarray:
    n, c = spec.n, spec.c
    scores = rng.uniform(0.1, 0.4, size=n * c)
    scores[list(spec.planted)] += spec.beta
    if spec.end_mass > 0.0:
        shoulder = np.zeros(n * c)
        shoulder[(n - spec.tail_frames) * c :] = spec.beta + SHOULDER_MARGIN
        scores = scores + shoulder
        tier_base = float(scores.max()) + TIER_GAP
        scores[tier_idx] = tier_base + rng.uniform(0.0, TIER_GAP, size=len(tier_idx))
    if spec.peak_multiplier > 1.0 and spec.peak_positions:
        scores = _lift_columns(scores, n, c, spec.peak_positions, spec.peak_multiplier)
    if spec.normalize:
        scores = scores / scores.sum()
    return scores.astype(np.float32)


def _verify(spec: SynthSpec, dump: AdtpDump, rel_planned: list, count_last: int, tier_size: int):
    segs = partition(dump.frame_embeddings, spec.tau_s_target)
    got = [(s.start, s.length) for s in segs]
    planned = list(zip(_segment_starts(spec.segment_lengths), spec.segment_lengths))
    if got != planned:
        raise InfeasibleSpec(
            f"embedding noise broke the segment plan: built {got}, planned {planned}"
        )
    flags = select_significant(frame_relevance(dump), segs, spec.tau_t_target)
    if [j for j, f in enumerate(flags) if f] != rel_planned:
        raise InfeasibleSpec(
            "significance flags disagree with the planted relevant segments; "
            "alignment or noise levels are off"
        )
    check_g = spec.end_mass > 0.0 and spec.peak_multiplier == 1.0
    check_lam = spec.peak_multiplier > 1.0 and spec.peak_positions
    check_top = spec.end_mass == 0.0 and spec.peak_multiplier == 1.0 and spec.beta > 0.3
    for layer in range(dump.num_layers):
        s = dump.layer_scores(layer)
        if check_g:
            gb = global_bias(s, spec.n, spec.c, spec.bias_top_q, spec.tail_frames)
            want = count_last / tier_size
            if abs(gb.end_fraction - want) > 1e-9:
                raise InfeasibleSpec(
                    f"layer {layer}: built end fraction {gb.end_fraction}, planted {want}"
                )
        if check_lam:
            lb = local_bias(s, spec.n, spec.c)
            if abs(lb.peak_ratio - spec.peak_multiplier) > 0.02 * spec.peak_multiplier:
                raise InfeasibleSpec(
                    f"layer {layer}: built peak ratio {lb.peak_ratio}, "
                    f"planted {spec.peak_multiplier}"
                )
        if check_top:
            order = np.argsort(-s.astype(np.float64), kind="stable")
            top = set(int(i) for i in order[: len(spec.planted)])
            if top != set(spec.planted):
                raise InfeasibleSpec(
                    f"layer {layer}: beta={spec.beta} does not put R on top of the scores"
                )


def generate(spec: SynthSpec):
    """Build one dump; returns (AdtpDump, frozenset of planted flat indices)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    frames, text, rel = _build_embeddings(spec, rng)
    tier_idx, tier_size, count_last = np.array([], dtype=np.int64), 0, 0
    if spec.end_mass > 0.0:
        tier_idx, tier_size, count_last = _pick_top_tier(spec, rng)
    attention = np.stack(
        [_build_layer_scores(spec, rng, tier_idx) for _ in range(spec.num_layers)]
    )
    dump = AdtpDump(
        n=spec.n,
        c=spec.c,
        d=spec.d,
        num_layers=spec.num_layers,
        frame_embeddings=frames,
        text_embedding=text,
        attention=attention,
        meta={"seed": str(spec.seed), "source": "synth"},
    )
    dump.validate()
    _verify(spec, dump, rel, count_last, tier_size)
    return dump, frozenset(int(i) for i in spec.planted)


def plant_tokens(
    segment_lengths: Sequence[int], c: int, segment_index: int, count: int, seed: int = 0
) -> tuple:
    """Deterministically place ``count`` tokens at distinct positions inside one segment."""
    if not 0 <= segment_index < len(segment_lengths):
        raise InvariantViolation(f"no segment {segment_index} in a {len(segment_lengths)}-segment plan")
    if count < 1 or count > c:
        raise InvariantViolation(f"need 1..{c} planted tokens for distinct positions, got {count}")
    start = _segment_starts(segment_lengths)[segment_index]
    length = segment_lengths[segment_index]
    rng = np.random.default_rng(seed)
    positions = rng.choice(c, size=count, replace=False)
    frames = rng.integers(start, start + length, size=count)
    return tuple(sorted(int(f) * c + int(p) for f, p in zip(frames, positions)))


# --- baselines ---------------------------------------------------------------


def _top_flat(scores: np.ndarray, count: int) -> frozenset:
    order = np.argsort(-scores.astype(np.float64), kind="stable")
    return frozenset(int(i) for i in order[:count])


def fastv_prune(dump: AdtpDump, retention: float, layer: int = 2) -> frozenset:
    """Single global top-k over one layer's scores; no segments, no debiasing."""
    if not 0.0 < retention <= 1.0:
        raise InvariantViolation(f"retention must lie in (0, 1], got {retention}")
    return _top_flat(dump.layer_scores(layer), math.floor(retention * dump.n * dump.c))


def random_prune(dump: AdtpDump, retention: float, seed: int) -> frozenset:
    if not 0.0 < retention <= 1.0:
        raise InvariantViolation(f"retention must lie in (0, 1], got {retention}")
    return _random_count(dump, math.floor(retention * dump.n * dump.c), seed)


def _random_count(dump: AdtpDump, count: int, seed: int) -> frozenset:
    rng = np.random.default_rng(seed)
    picked = rng.choice(dump.n * dump.c, size=count, replace=False)
    return frozenset(int(i) for i in picked)


def recall(kept: frozenset, truth: frozenset) -> float:
    if not truth:
        raise InvariantViolation("ground truth is empty")
    return len(kept & truth) / len(truth)


# --- corpus comparison --------------------------------------------------------

METHODS = ("adatp", "fastv", "random")


@dataclass(frozen=True)
class MethodResult:
    method: str
    retention: float  # achieved final fraction of visual tokens, matched across methods
    mean_recall: float
    std_recall: float
    flops_ratio: float
    recalls: tuple = field(repr=False, default=())
    kept_counts: tuple = field(repr=False, default=())


def _baseline_counts(num_layers: int, nc: int, kept: int, layer: int) -> list:
    cut = min(layer, num_layers)
    return [nc] * cut + [kept] * (num_layers - cut)


def compare(
    corpus: Sequence,
    cfg: Optional[AdaTPConfig] = None,
    methods: Sequence[str] = METHODS,
    shape: Optional[_flops.ModelShape] = None,
    seed: int = 0,
    fastv_layer: int = 2,
) -> list:
    """Score each method's planted-token recall at matched final retention.

    ``corpus`` is a sequence of (name, dump, truth) triples. The pipeline runs
    first; its achieved final count per dump becomes the keep budget for the
    baselines, so every row spends the same token budget on the same input.
    """
    if not corpus:
        raise InvariantViolation("empty corpus")
    for m in methods:
        if m not in METHODS:
            raise InvariantViolation(f"unknown method {m!r}; choose from {METHODS}")
    for name, _, truth in corpus:
        if not truth:
            raise InvariantViolation(f"dump {name!r} has no ground truth")
    cfg = cfg if cfg is not None else AdaTPConfig()

    per_method = {m: {"recalls": [], "counts": [], "flops": []} for m in methods}
    retentions = []
    for i, (name, dump, truth) in enumerate(corpus):
        nc = dump.n * dump.c
        report = run_pipeline(dump, cfg, shape=shape)
        budget = len(report.final_kept)
        retentions.append(budget / nc)
        base_counts = _baseline_counts(dump.num_layers, nc, budget, fastv_layer)
        use_shape = shape if shape is not None else _flops.ModelShape(
            num_layers=dump.num_layers, d_model=dump.d, visual_tokens=nc
        )
        for m in methods:
            if m == "adatp":
                kept = frozenset(report.final_kept)
                fl = report.flops_ratio
            elif m == "fastv":
                kept = _top_flat(dump.layer_scores(fastv_layer), budget)
                fl = _flops.ratio_from_counts(base_counts, use_shape)
            else:
                kept = _random_count(dump, budget, seed=seed * 1_000_003 + i)
                fl = _flops.ratio_from_counts(base_counts, use_shape)
            per_method[m]["recalls"].append(recall(kept, truth))
            per_method[m]["counts"].append(len(kept))
            per_method[m]["flops"].append(fl)

    results = []
    for m in methods:
        rec = per_method[m]["recalls"]
        results.append(
            MethodResult(
                method=m,
                retention=statistics.fmean(retentions),
                mean_recall=statistics.fmean(rec),
                std_recall=statistics.pstdev(rec) if len(rec) > 1 else 0.0,
                flops_ratio=statistics.fmean(per_method[m]["flops"]),
                recalls=tuple(rec),
                kept_counts=tuple(per_method[m]["counts"]),
            )
        )
    return results


def write_compare_csv(results: Sequence[MethodResult], fp: TextIO) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["method", "retention", "mean_recall", "std_recall", "flops_ratio"])
    for r in results:
        w.writerow(
            [
                r.method,
                repr(float(r.retention)),
                repr(float(r.mean_recall)),
                repr(float(r.std_recall)),
                repr(float(r.flops_ratio)),
            ]
        )


# --- corpus files -------------------------------------------------------------


def truth_path(dump_path) -> Path:
    return Path(dump_path).with_suffix(".truth")


def write_truth(path, indices: Iterable[int]) -> None:
    Path(path).write_text("".join(f"{int(i)}\n" for i in sorted(set(indices))))


def read_truth(path) -> frozenset:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    return frozenset(int(ln) for ln in lines if ln)


def load_corpus(directory) -> list:
    """All *.adtp files in a directory with their .truth sidecars (or None)."""
    directory = Path(directory)
    triples = []
    for p in sorted(directory.glob("*.adtp")):
        truth = read_truth(truth_path(p)) if truth_path(p).exists() else None
        triples.append((p.stem, read_dump_file(p), truth))
    if not triples:
        raise InvariantViolation(f"no .adtp files under {directory}")
    return triples
