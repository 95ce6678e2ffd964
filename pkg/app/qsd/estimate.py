from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.models.measure import WeightedSamples
from app.utils.errors import QsdError

QsdMethod = Literal["fleming_viot", "pruning", "spectral"]


@dataclass(frozen=True)
class QsdEstimate:
    """Empirical quasi-stationary law with its survival rate theta.

    `killing_margin` = 0 means the true boundary; eps > 0 means the process
    killed on leaving {x : min_i x_i > eps}. Every support point lies strictly
    inside the killing boundary.
    """

    samples: WeightedSamples
    theta: float
    theta_se: float
    method: QsdMethod
    killing_margin: float = 0.0
    burn_in: float = 0.0
    particles: int = 0
    n_size: int = 1
    model_name: str = "custom"
    events: int = 0

    def __post_init__(self) -> None:
        if self.theta < 0 or not np.isfinite(self.theta):
            raise QsdError(f"survival rate must be finite and >= 0, got {self.theta}")
        if np.any(self.samples.points.min(axis=1) <= self.killing_margin):
            raise QsdError(f"QSD support touches the killing boundary eps={self.killing_margin:g}")

    @property
    def points(self) -> np.ndarray:
        return self.samples.points

    @property
    def mean_tau(self) -> float:
        return 1.0 / self.theta if self.theta > 0 else float("inf")

    def report_line(self) -> str:
        return f"theta={self.theta:.17g} se={self.theta_se:.17g} method={self.method} eps={self.killing_margin:.17g}"

    def header(self) -> list[str]:
        return [f"x{i + 1}" for i in range(self.samples.d)]

    def rows(self) -> list[list[float]]:
        return [[float(v) for v in point] for point in self.samples.points]
