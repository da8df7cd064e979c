"""Segment-aware, bias-corrected visual-token pruning over serialized attention dumps."""

from .config import AdaTPConfig
from .dump import AdtpDump, TokenId, flatten_token, read_dump, read_dump_file, reduce_attention, unflatten_token, write_dump, write_dump_file
from .bias import BiasReport, analyze_dump, global_bias, local_bias
from .flops import ModelShape, layer_flops, ratio, ratio_from_counts
from .global_debias import FrameRelevance, RetentionPlan, allocate, frame_relevance, select_significant
from .local_debias import ScoredToken, dedup
from .pipeline import PruneReport, PruneSchedule, run, schedule
from .segmenter import Segment, cos_sim, partition
from .synth import MethodResult, SynthSpec, compare, fastv_prune, generate, plant_tokens, random_prune
from . import errors

__version__ = "0.1.0"

__all__ = [
    "AdaTPConfig",
    "AdtpDump",
    "TokenId",
    "flatten_token",
    "unflatten_token",
    "read_dump",
    "read_dump_file",
    "write_dump",
    "write_dump_file",
    "reduce_attention",
    "BiasReport",
    "analyze_dump",
    "global_bias",
    "local_bias",
    "ModelShape",
    "layer_flops",
    "ratio",
    "ratio_from_counts",
    "FrameRelevance",
    "RetentionPlan",
    "allocate",
    "frame_relevance",
    "select_significant",
    "ScoredToken",
    "dedup",
    "PruneReport",
    "PruneSchedule",
    "run",
    "schedule",
    "Segment",
    "cos_sim",
    "partition",
    "MethodResult",
    "SynthSpec",
    "compare",
    "fastv_prune",
    "generate",
    "plant_tokens",
    "random_prune",
    "errors",
    "__version__",
]
