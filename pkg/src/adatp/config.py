"""Pipeline configuration with the published default hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import InvariantViolation


@dataclass(frozen=True)
class AdaTPConfig:
    """Knobs for the whole pruning pipeline.

    Defaults: tau_s=0.95, tau_t=0.05, alpha_boost=2.2, gamma_cap=0.75, p=1.0;
    pruning runs from start_layer=2 through layer N - keep_last_layers.
    """

    tau_s: float = 0.95
    tau_t: float = 0.05
    alpha_boost: float = 2.2
    gamma_cap: float = 0.75
    p: float = 1.0
    start_layer: int = 2
    keep_last_layers: int = 12
    dedup_exempt_nonspatial: bool = False

    def validate(self) -> "AdaTPConfig":
        if not -1.0 <= self.tau_s <= 1.0:
            raise InvariantViolation(f"tau_s must lie in [-1, 1], got {self.tau_s}")
        if not -1.0 <= self.tau_t <= 1.0:
            raise InvariantViolation(f"tau_t must lie in [-1, 1], got {self.tau_t}")
        if self.alpha_boost < 1.0:
            raise InvariantViolation(f"alpha_boost must be >= 1, got {self.alpha_boost}")
        if not 0.0 < self.gamma_cap <= 1.0:
            raise InvariantViolation(f"gamma_cap must lie in (0, 1], got {self.gamma_cap}")
        if self.p <= 0.0:
            raise InvariantViolation(f"p must be > 0, got {self.p}")
        if self.start_layer < 0:
            raise InvariantViolation(f"start_layer must be >= 0, got {self.start_layer}")
        if self.keep_last_layers < 0:
            raise InvariantViolation(f"keep_last_layers must be >= 0, got {self.keep_last_layers}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)
