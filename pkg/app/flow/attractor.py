from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from app.config import settings
from app.flow.integrator import flow_step, step_count
from app.models.simplex import barycentric_grid, validate_simplex
from app.models.spec import ModelSpec
from app.utils.errors import AttractorError, PreconditionError

logger = logging.getLogger(__name__)

SETTLE_FRACTION = 0.1
DEEP_CONVERGENCE_FACTOR = 1e-3


@dataclass(frozen=True)
class AttractorProbe:
    """Grid certificate that the flow converges uniformly to a candidate set.

    `convergence_times[eps]` is the first grid time after which every start of
    the neighbourhood stays within `eps` of the candidate set.
    """

    model_name: str
    candidate: tuple[tuple[float, ...], ...]
    neighborhood_radius: float
    grid_resolution: int
    starts: int
    convergence_times: dict[float, float]
    horizon: float
    dt: float

    @property
    def separation(self) -> float:
        """Distance from the candidate set to the complement of the neighbourhood."""
        return self.neighborhood_radius

    def time_for(self, eps: float) -> float:
        return self.convergence_times[eps]


def _distance_to_set(points: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    gaps = points[:, None, :] - candidate[None, :, :]
    return np.linalg.norm(gaps, axis=-1).min(axis=1)


def neighborhood_grid(candidate: np.ndarray, radius: float, resolution: int) -> np.ndarray:
    """Interior lattice points within `radius` of the candidate, plus the candidate points."""
    d = candidate.shape[1]
    lattice = barycentric_grid(d, resolution)
    lattice = lattice[lattice.min(axis=1) > 0.0]
    inside = lattice[_distance_to_set(lattice, candidate) <= radius + 1e-12]
    return np.concatenate([candidate, inside], axis=0)


def probe_attractor(
    model: ModelSpec,
    candidate: Sequence[Sequence[float]],
    neighborhood_radius: float,
    eps_list: Sequence[float],
    grid_resolution: int,
    horizon: float | None = None,
    dt: float | None = None,
) -> AttractorProbe:
    """Certify uniform convergence of the flow to `candidate` on a finite grid.

    Raises PreconditionError when a candidate point is not in the open simplex
    and AttractorError when some start has not settled by the stopping horizon.
    """
    if not candidate:
        raise ValueError("attractor candidate must contain at least one point")
    if neighborhood_radius <= 0 or not eps_list or min(eps_list) <= 0:
        raise ValueError("neighborhood radius and every eps must be positive")
    if grid_resolution < 2:
        raise ValueError(f"grid_resolution must be >= 2, got {grid_resolution}")
    horizon = settings.probe_horizon if horizon is None else horizon
    dt = settings.probe_dt if dt is None else dt

    points = np.array([validate_simplex(p).as_array() for p in candidate])
    if points.shape[1] != model.d:
        raise ValueError(f"candidate points have dimension {points.shape[1]}, model has d={model.d}")
    if np.any(points.min(axis=1) <= 0.0):
        raise PreconditionError(
            f"attractor candidate for {model.name} is not in the open simplex; "
            "an interior attractor is required"
        )

    started_at = perf_counter()
    starts = neighborhood_grid(points, neighborhood_radius, grid_resolution)
    logger.info("Step: probe_attractor start model=%s starts=%s horizon=%s", model.name, starts.shape[0], horizon)

    eps_sorted = sorted(float(e) for e in eps_list)
    last_violation = {eps: -1 for eps in eps_sorted}
    n_steps = step_count(horizon, dt)
    state = starts.copy()
    deep = eps_sorted[0] * DEEP_CONVERGENCE_FACTOR
    reached = n_steps
    for k in range(n_steps + 1):
        if k > 0:
            state = flow_step(model, state, dt, "rk4")
            if not np.all(np.isfinite(state)):
                raise AttractorError(f"flow left the finite range at step {k} while probing {model.name}")
        distance = float(_distance_to_set(state, points).max())
        for eps in eps_sorted:
            if distance >= eps:
                last_violation[eps] = k
        if distance < deep:
            reached = k
            break

    if reached == n_steps:
        settle_from = int(n_steps * (1.0 - SETTLE_FRACTION))
        unsettled = [eps for eps in eps_sorted if last_violation[eps] >= settle_from]
        if unsettled:
            raise AttractorError(
                f"not an attractor at this resolution: starts near {model.name} candidate did not settle "
                f"within eps={unsettled[0]:g} by horizon {horizon:g}"
            )

    times = {eps: (last_violation[eps] + 1) * dt for eps in eps_sorted}
    logger.info(
        "Step: probe_attractor done model=%s times=%s elapsed=%.3fs",
        model.name,
        times,
        perf_counter() - started_at,
    )
    return AttractorProbe(
        model_name=model.name,
        candidate=tuple(tuple(float(v) for v in p) for p in points),
        neighborhood_radius=float(neighborhood_radius),
        grid_resolution=grid_resolution,
        starts=int(starts.shape[0]),
        convergence_times=times,
        horizon=float(horizon),
        dt=float(dt),
    )
