"""Analytic decoder-layer FLOPs model for pruned-vs-vanilla compute ratios.

Per layer with sequence length L and hidden size d:
    (4 + 4e) * L * d^2   QKV/output projections plus the two MLP matmuls
    + 2 * L^2 * d        attention score and value matmuls
Embedding, normalization, softmax, and vocabulary projection are omitted:
they are token-linear or constant and cancel (approximately) in the ratio.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import InvariantViolation, ShapeMismatch


@dataclass(frozen=True)
class ModelShape:
    num_layers: int
    d_model: int
    visual_tokens: int  # original n*c
    mlp_expansion: float = 4.0
    text_tokens: int = 64

    def validate(self) -> "ModelShape":
        for name, v in asdict(self).items():
            if v <= 0:
                raise InvariantViolation(f"ModelShape.{name} must be positive, got {v}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def layer_flops(tokens: int, shape: ModelShape) -> float:
    """Cost of one decoder layer over a sequence of ``tokens`` tokens."""
    if tokens < 1:
        raise InvariantViolation(f"layer needs at least one token, got {tokens}")
    d = shape.d_model
    return (4.0 + 4.0 * shape.mlp_expansion) * tokens * d * d + 2.0 * tokens * tokens * d


def ratio_from_counts(visual_counts: Sequence[int], shape: ModelShape) -> float:
    """Pruned/vanilla FLOPs ratio given the per-layer visual-token counts."""
    shape.validate()
    if len(visual_counts) != shape.num_layers:
        raise ShapeMismatch(
            f"got {len(visual_counts)} per-layer counts for a {shape.num_layers}-layer shape"
        )
    t = shape.text_tokens
    pruned = sum(layer_flops(t + int(v), shape) for v in visual_counts)
    vanilla = shape.num_layers * layer_flops(t + shape.visual_tokens, shape)
    return pruned / vanilla


def ratio(report, shape: ModelShape) -> float:
    """FLOPs ratio for a finished PruneReport (duck-typed to avoid a cycle)."""
    if report.num_layers != shape.num_layers:
        raise ShapeMismatch(
            f"report has {report.num_layers} layers, shape has {shape.num_layers}"
        )
    if report.n * report.c != shape.visual_tokens:
        raise ShapeMismatch(
            f"report covers {report.n * report.c} visual tokens, shape expects {shape.visual_tokens}"
        )
    return ratio_from_counts(report.layer_counts, shape)
