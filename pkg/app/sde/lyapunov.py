from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from app.models.simplex import SimplexPoint, lattice_compositions
from app.models.spec import ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LyapunovReport:
    """Worst value of L V_i on the collar {x : x_i < delta}, with V_i(x) = -x_i log x_i."""

    model_name: str
    coordinate: int
    delta: float
    grid_resolution: int
    grid_points: int
    max_value: float
    witness: tuple[float, ...]

    @property
    def alpha(self) -> float:
        return -self.max_value

    @property
    def passed(self) -> bool:
        return self.max_value < 0.0

    def exit_time_bound(self, x0: SimplexPoint | Sequence[float] | np.ndarray) -> float:
        """Upper bound V_i(x0)/alpha on the mean exit time from the collar."""
        coords = x0.as_array() if isinstance(x0, SimplexPoint) else np.asarray(x0, dtype=float)
        if coords[self.coordinate] >= self.delta:
            raise ValueError(f"x0 must lie in the collar x_{self.coordinate + 1} < {self.delta:g}")
        if not self.passed:
            return float("inf")
        return float(-xlogy(coords[self.coordinate], coords[self.coordinate]) / self.alpha)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        witness = ",".join(f"{v:.6g}" for v in self.witness)
        return (
            f"LYAPUNOV x{self.coordinate + 1}: {status} max_LV={self.max_value:.10g} "
            f"alpha={self.alpha:.10g} delta={self.delta:g} witness=({witness})"
        )


def collar_grid(d: int, coordinate: int, delta: float, resolution: int) -> np.ndarray:
    """Points with x_i = delta*k/resolution (k < resolution), the rest on a lattice."""
    levels = delta * np.arange(resolution) / resolution
    others = lattice_compositions(d - 1, resolution) / float(resolution)
    rows = []
    for level in levels:
        block = np.empty((others.shape[0], d))
        block[:, coordinate] = level
        block[:, [j for j in range(d) if j != coordinate]] = others * (1.0 - level)
        rows.append(block)
    return np.concatenate(rows, axis=0)


def lyapunov_values(model: ModelSpec, x: np.ndarray, coordinate: int) -> np.ndarray:
    """L V_i(x) = V_i F_i - x_i F_i - (σσ*)_ii / 2 with V_i(x) = -x_i log x_i and N = 1."""
    xi = x[:, coordinate]
    rate = model.drift_values(x)[:, coordinate]
    potential = -xlogy(xi, xi)
    return potential * rate - xi * rate - 0.5 * model.sigma_gram_diagonal(x)[:, coordinate]


def lyapunov_drift_check(model: ModelSpec, coordinate: int, delta: float, grid_resolution: int) -> LyapunovReport:
    if not 0 <= coordinate < model.d:
        raise ValueError(f"coordinate must lie in [0, {model.d}), got {coordinate}")
    if not 0.0 < delta < 1.0 / model.d:
        raise ValueError(f"delta must lie in (0, 1/d), got {delta}")
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be >= 1")
    grid = collar_grid(model.d, coordinate, delta, grid_resolution)
    values = lyapunov_values(model, grid, coordinate)
    worst = int(np.argmax(values))
    report = LyapunovReport(
        model_name=model.name,
        coordinate=coordinate,
        delta=delta,
        grid_resolution=grid_resolution,
        grid_points=int(grid.shape[0]),
        max_value=float(values[worst]),
        witness=tuple(float(v) for v in grid[worst]),
    )
    logger.info(
        "Lyapunov check model=%s coordinate=%s delta=%s alpha=%.6g passed=%s",
        model.name,
        coordinate + 1,
        delta,
        report.alpha,
        report.passed,
    )
    return report
