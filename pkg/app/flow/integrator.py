from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.config import settings
from app.models.measure import WeightedSamples
from app.models.simplex import SimplexPoint, renormalize, validate_simplex
from app.models.spec import ModelSpec
from app.utils.errors import FlowError

logger = logging.getLogger(__name__)

FlowMethod = Literal["rk4", "euler"]


@dataclass(frozen=True)
class FlowTrajectory:
    """Reference trajectory φ_t(x0) of the mean ODE on a uniform time grid."""

    times: np.ndarray
    states: np.ndarray
    initial: SimplexPoint
    method: FlowMethod = "rk4"

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def state_at(self, times: np.ndarray | Sequence[float]) -> np.ndarray:
        """Linear interpolation of the states at arbitrary times (clipped to the grid)."""
        query = np.asarray(times, dtype=float)
        columns = [np.interp(query, self.times, self.states[:, i]) for i in range(self.states.shape[1])]
        return np.stack(columns, axis=-1)

    def header(self) -> list[str]:
        return ["t"] + [f"x{i + 1}" for i in range(self.states.shape[1])]

    def rows(self) -> list[list[float]]:
        return [[float(t), *map(float, state)] for t, state in zip(self.times, self.states)]


def flow_step(model: ModelSpec, x: np.ndarray, dt: float, method: FlowMethod = "rk4") -> np.ndarray:
    """Advance a (n, d) batch by one step and map it back onto the simplex.

    The "euler" branch shares the expression order of the stochastic scheme,
    so a zero-noise simulation reproduces it exactly. A step that leaves the
    simplex by more than the simplex tolerance raises FlowError.
    """
    if method == "euler":
        y = x + model.drift_field(x) * dt
    elif method == "rk4":
        k1 = model.drift_field(x)
        k2 = model.drift_field(x + 0.5 * dt * k1)
        k3 = model.drift_field(x + 0.5 * dt * k2)
        k4 = model.drift_field(x + dt * k3)
        y = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"Unsupported flow method {method!r}. Use 'rk4' or 'euler'.")
    lowest = float(y.min())
    if lowest < -settings.simplex_tolerance:
        raise FlowError(f"{method} step of size {dt:g} left the simplex for {model.name} (min coordinate {lowest:.3g})")
    return renormalize(np.maximum(y, 0.0))


def step_count(horizon: float, dt: float) -> int:
    """Number of dt steps needed to reach at least `horizon`."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if horizon < dt:
        raise ValueError(f"horizon must be >= dt, got horizon={horizon} dt={dt}")
    return int(math.ceil(horizon / dt - 1e-9))


def integrate_flow(
    model: ModelSpec,
    x0: SimplexPoint | Sequence[float] | np.ndarray,
    horizon: float,
    dt: float,
    method: FlowMethod = "rk4",
) -> FlowTrajectory:
    """Integrate x' = x∘F(x) from x0 with renormalization after every step."""
    start = x0 if isinstance(x0, SimplexPoint) else validate_simplex(x0)
    n_steps = step_count(horizon, dt)
    states = np.empty((n_steps + 1, model.d))
    states[0] = start.as_array()
    current = states[:1].copy()
    for k in range(1, n_steps + 1):
        current = flow_step(model, current, dt, method)
        if not np.all(np.isfinite(current)):
            raise FlowError(f"non-finite flow state for model {model.name} at step {k} (t={k * dt:g})")
        states[k] = current[0]
    times = dt * np.arange(n_steps + 1)
    logger.debug("Integrated flow model=%s steps=%s method=%s", model.name, n_steps, method)
    return FlowTrajectory(times=times, states=states, initial=start, method=method)


def flow_time_average(
    model: ModelSpec,
    x0: SimplexPoint | Sequence[float] | np.ndarray,
    horizon: float,
    dt: float,
    burn_in: float,
) -> WeightedSamples:
    """Empirical measure of the post-burn-in flow states, equally weighted.

    This is the time-average candidate for an invariant measure of the flow.
    """
    if not 0 <= burn_in < horizon:
        raise ValueError(f"burn_in must lie in [0, horizon), got burn_in={burn_in} horizon={horizon}")
    trajectory = integrate_flow(model, x0, horizon, dt)
    keep = trajectory.times >= burn_in
    return WeightedSamples.uniform(trajectory.states[keep])
