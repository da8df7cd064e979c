"""Layer-by-layer pruning pipeline.

Runs the full selection stack over a serialized dump: segment the frames,
split the retention budget between significant and plain segments, take the
per-segment top scorers at each pruning layer, and collapse duplicate
spatial positions. Produces a PruneReport that records every intermediate
decision so a run can be audited (or re-costed) without the dump.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import flops as _flops
from .config import AdaTPConfig
from .dump import AdtpDump, TokenId
from .errors import TooFewLayers
from .global_debias import RetentionPlan, allocate, frame_relevance, select_significant
from .local_debias import ScoredToken, dedup, scan_order
from .segmenter import Segment, partition

RHO_START_FRAC = 0.40
RHO_END_FRAC = 0.12


@dataclass(frozen=True)
class PruneSchedule:
    """Linear retention ramp over the pruning window [start_layer, stop_layer]."""

    start_layer: int
    stop_layer: int
    rho_start_raw: float  # 0.40 * p, before the <=1 clamp
    rho_end_raw: float  # 0.12 * p

    @property
    def rho_start(self) -> float:
        return min(1.0, self.rho_start_raw)

    @property
    def rho_end(self) -> float:
        return min(1.0, self.rho_end_raw)

    def rho(self, layer: int) -> float:
        if layer <= self.start_layer:
            raw = self.rho_start_raw
        elif layer >= self.stop_layer:
            raw = self.rho_end_raw
        else:
            span = self.stop_layer - self.start_layer
            frac = (layer - self.start_layer) / span
            raw = self.rho_start_raw + (self.rho_end_raw - self.rho_start_raw) * frac
        return min(1.0, raw)

    def pruning_layers(self) -> range:
        return range(self.start_layer, self.stop_layer + 1)


def schedule(cfg: AdaTPConfig, num_layers: int) -> PruneSchedule:
    """Build the retention schedule, or refuse if the window is degenerate."""
    cfg.validate()
    stop = num_layers - cfg.keep_last_layers
    if not (0 < cfg.start_layer < stop < num_layers):
        raise TooFewLayers(num_layers, cfg.start_layer, stop)
    return PruneSchedule(
        start_layer=cfg.start_layer,
        stop_layer=stop,
        rho_start_raw=RHO_START_FRAC * cfg.p,
        rho_end_raw=RHO_END_FRAC * cfg.p,
    )


@dataclass
class PruneState:
    """Mutable survivor set threaded through the pruning window."""

    layer: int
    survivors: list  # list[list[TokenId]], grouped by segment

    @property
    def count(self) -> int:
        return sum(len(group) for group in self.survivors)


@dataclass(frozen=True)
class LayerTrace:
    layer: int
    rho: float
    target: int
    applied: bool
    plan: RetentionPlan
    dedup_loss: int
    kept: tuple  # flat token indices after this layer, sorted ascending

    @property
    def kept_count(self) -> int:
        return len(self.kept)


@dataclass(frozen=True)
class PruneReport:
    n: int
    c: int
    num_layers: int
    nonspatial_count: int
    config: AdaTPConfig
    sched: PruneSchedule
    frame_sims: tuple
    segments: tuple  # Segment
    significant: tuple  # bool per segment
    layer_counts: tuple  # visual tokens processed by each layer, length num_layers
    layers: tuple  # LayerTrace per pruning layer
    final_kept: tuple  # flat token indices surviving the whole window
    flops_ratio: float
    shape: _flops.ModelShape
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "format": "adatp-prune-report/1",
            "n": self.n,
            "c": self.c,
            "num_layers": self.num_layers,
            "nonspatial_count": self.nonspatial_count,
            "config": self.config.to_dict(),
            "schedule": {
                "start_layer": self.sched.start_layer,
                "stop_layer": self.sched.stop_layer,
                "rho_start": self.sched.rho_start,
                "rho_end": self.sched.rho_end,
            },
            "frame_sims": list(self.frame_sims),
            "segments": [
                {
                    "id": seg.id,
                    "start": seg.start,
                    "length": seg.length,
                    "significant": bool(sig),
                }
                for seg, sig in zip(self.segments, self.significant)
            ],
            "layer_counts": list(self.layer_counts),
            "layers": [
                {
                    "layer": tr.layer,
                    "rho": tr.rho,
                    "target": tr.target,
                    "applied": tr.applied,
                    "plan": {
                        "r": tr.plan.r,
                        "r1": tr.plan.r1,
                        "r2": tr.plan.r2,
                        "r1_raw": tr.plan.r1_raw,
                        "r2_raw": tr.plan.r2_raw,
                        "budget_per_segment": list(tr.plan.budget_per_segment),
                        "shortfall_tokens": tr.plan.shortfall_tokens,
                        "boost_limited_by": tr.plan.boost_limited_by,
                    },
                    "dedup_loss": tr.dedup_loss,
                    "kept_count": tr.kept_count,
                    "kept": list(tr.kept),
                }
                for tr in self.layers
            ],
            "final_kept": list(self.final_kept),
            "flops": {"ratio": self.flops_ratio, "shape": self.shape.to_dict()},
            "meta": dict(sorted(self.meta.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def counts_from_json_dict(d: dict) -> tuple:
    """Pull (layer_counts, shape) back out of a serialized report."""
    shape = _flops.ModelShape(**d["flops"]["shape"])
    return list(d["layer_counts"]), shape


def _segment_tokens(segments: Iterable[Segment], c: int) -> list:
    return [
        [TokenId(f, p) for f in seg.frames() for p in range(c)] for seg in segments
    ]


def run(
    dump: AdtpDump,
    cfg: Optional[AdaTPConfig] = None,
    shape: Optional[_flops.ModelShape] = None,
) -> PruneReport:
    """Prune one dump end to end and return the full trace."""
    cfg = cfg if cfg is not None else AdaTPConfig()
    dump.validate()
    n, c, num_layers = dump.n, dump.c, dump.num_layers
    nc = n * c
    sched = schedule(cfg, num_layers)

    segments = tuple(partition(dump.frame_embeddings, cfg.tau_s))
    rel = frame_relevance(dump)
    significant = select_significant(rel, segments, cfg.tau_t)
    exempt = frozenset()
    if cfg.dedup_exempt_nonspatial and dump.nonspatial_count:
        exempt = frozenset(range(c - dump.nonspatial_count, c))

    state = PruneState(layer=sched.start_layer, survivors=_segment_tokens(segments, c))
    counts = [nc] * num_layers
    traces = []
    for layer in sched.pruning_layers():
        state.layer = layer
        rho = sched.rho(layer)
        target = math.floor(rho * nc)
        plan = allocate(segments, significant, cfg, r=rho, c=c)
        # Skip the whole layer once the survivor set is already below target;
        # reapplying the plan would only re-rank an already-tight set.
        applied = state.count >= target
        dedup_loss = 0
        if applied:
            scores = dump.layer_scores(layer)
            next_groups = []
            for group, budget in zip(state.survivors, plan.budget_per_segment):
                scored = [
                    ScoredToken(tid, float(scores[tid.frame * c + tid.pos]))
                    for tid in group
                ]
                scored.sort(key=scan_order)
                selected = scored[:budget]
                kept = dedup(selected, exempt_positions=exempt)
                dedup_loss += len(selected) - len(kept)
                next_groups.append([tok.id for tok in kept])
            state.survivors = next_groups
        kept_flat = tuple(
            sorted(t.frame * c + t.pos for group in state.survivors for t in group)
        )
        counts[layer] = state.count
        traces.append(
            LayerTrace(
                layer=layer,
                rho=rho,
                target=target,
                applied=applied,
                plan=plan,
                dedup_loss=dedup_loss,
                kept=kept_flat,
            )
        )
    for layer in range(sched.stop_layer + 1, num_layers):
        counts[layer] = state.count

    if shape is None:
        shape = _flops.ModelShape(
            num_layers=num_layers, d_model=dump.d, visual_tokens=nc
        )
    final_kept = traces[-1].kept
    report = PruneReport(
        n=n,
        c=c,
        num_layers=num_layers,
        nonspatial_count=dump.nonspatial_count,
        config=cfg,
        sched=sched,
        frame_sims=tuple(rel.sims.tolist()),
        segments=segments,
        significant=tuple(bool(s) for s in significant),
        layer_counts=tuple(counts),
        layers=tuple(traces),
        final_kept=final_kept,
        flops_ratio=_flops.ratio_from_counts(counts, shape),
        shape=shape,
        meta=dict(dump.meta),
    )
    return report
