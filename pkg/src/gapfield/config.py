"""Configuration types shared across the solver, analysis and CLI layers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

# Hard cap on the gap width: the asymptotic machinery assumes a small gap,
# so wide gaps are refused instead of silently degrading.
EPS_CAP = 0.25

# Default half-width of the trace domain measured from the near sphere surface.
# Must exceed 1 + EPS_CAP so that traces cover the far sphere's full chord.
DEFAULT_X_MAX = 4.0


class FieldKind(Enum):
    """Background harmonic field driving the two-sphere problem."""

    Y_LINEAR = "y"
    X_LINEAR = "x"
    CUSTOM = "custom"


@dataclass(frozen=True)
class GapConfig:
    """Problem definition: gap width, background field and solver targets.

    ``tol`` is the absolute sup-norm target for the certified truncation
    tail of the reflection series on the trace domain; the solver also
    enforces it relative to the accumulated solution scale.
    """

    epsilon: float
    field_kind: FieldKind = FieldKind.Y_LINEAR
    custom_dy_trace: Optional[Callable[[float], float]] = None
    custom_dx_trace: Optional[Callable[[float], float]] = None
    tol: float = 1e-8
    max_depth: int = 50_000

    def __post_init__(self):
        if not (0.0 < self.epsilon < EPS_CAP):
            raise ValueError(
                f"epsilon must lie in (0, {EPS_CAP}), got {self.epsilon}"
            )
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.field_kind is FieldKind.CUSTOM:
            if self.custom_dy_trace is None or self.custom_dx_trace is None:
                raise ValueError(
                    "CUSTOM field requires both custom_dy_trace and custom_dx_trace"
                )
            self._probe_custom_traces()
        elif self.custom_dy_trace is not None or self.custom_dx_trace is not None:
            raise ValueError("custom traces are only allowed with field_kind=CUSTOM")

    def _probe_custom_traces(self):
        # Custom traces must be finite on the axis span the solver touches.
        half = 1.0 + self.epsilon / 2.0
        for name, fn in (("custom_dy_trace", self.custom_dy_trace),
                         ("custom_dx_trace", self.custom_dx_trace)):
            for x in (-half, -half / 2, 0.0, half / 2, half):
                v = fn(x)
                if not math.isfinite(v):
                    raise ValueError(f"{name} is not finite at x={x}: {v}")

    @property
    def centers(self) -> tuple[float, float]:
        """Sphere centers on the x axis: (left, right)."""
        c = 1.0 + self.epsilon / 2.0
        return (-c, c)


@dataclass(frozen=True)
class SweepSpec:
    """Log-spaced gap-width sweep used for exponent extraction."""

    eps_min: float
    eps_max: float
    count: int
    tol: float = 1e-8
    output_dir: Path = field(default_factory=lambda: Path("."))
    spacing: str = "LOG"

    def __post_init__(self):
        if not (0.0 < self.eps_min < self.eps_max <= EPS_CAP):
            raise ValueError(
                f"need 0 < eps_min < eps_max <= {EPS_CAP}, "
                f"got ({self.eps_min}, {self.eps_max})"
            )
        if self.count < 4:
            raise ValueError(f"count must be >= 4, got {self.count}")
        if self.spacing != "LOG":
            raise ValueError(f"only LOG spacing is supported, got {self.spacing}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")

    def grid(self) -> list[float]:
        """Epsilon values, decreasing from eps_max to eps_min."""
        lo = math.log10(self.eps_min)
        hi = math.log10(self.eps_max)
        step = (hi - lo) / (self.count - 1)
        return [10.0 ** (hi - i * step) for i in range(self.count)]
