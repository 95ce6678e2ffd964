from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from app.config import settings
from app.flow.integrator import integrate_flow
from app.models.simplex import SimplexPoint, lattice_compositions, validate_simplex
from app.models.spec import ModelSpec
from app.sde.simulator import Scheme, TrajectoryBatch, run_ensemble

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeviationStat:
    """D_N(T) = max over the time grid of |X_t - φ_t(X_0)| for one path."""

    deviation: float
    horizon: float
    stream: int


def exceedance(stats: Sequence[DeviationStat], delta: float) -> tuple[int, int]:
    """(number of paths with D_N(T) >= delta, number of paths)."""
    hits = sum(1 for item in stats if item.deviation >= delta)
    return hits, len(stats)


def mean_deviation(stats: Sequence[DeviationStat]) -> tuple[float, float]:
    """Empirical mean of D_N(T) and its standard error."""
    values = np.array([item.deviation for item in stats])
    if values.size < 2:
        return float(values.mean()) if values.size else float("nan"), float("nan")
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def deviation_batch(
    model: ModelSpec,
    x0: SimplexPoint | Sequence[float] | np.ndarray,
    horizon: float,
    dt: float,
    seed: int,
    count: int,
    scheme: Scheme = "euler_clamp",
    workers: int | None = None,
) -> tuple[list[DeviationStat], TrajectoryBatch]:
    """Simulate `count` paths from x0 and measure each against the RK4 flow.

    The flow is integrated once on the dt grid and interpolated onto the
    simulation times; absorbed paths stay frozen and keep being compared.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    started_at = perf_counter()
    start = validate_simplex(x0.coords if isinstance(x0, SimplexPoint) else x0)
    flow = integrate_flow(model, start, horizon, dt)
    reference = flow.state_at(flow.times)
    starts = np.tile(start.as_array(), (count, 1))
    result = run_ensemble(model, starts, horizon, dt, scheme, seed, reference=reference, workers=workers)
    assert result.deviations is not None
    stats = [DeviationStat(deviation=float(v), horizon=horizon, stream=k) for k, v in enumerate(result.deviations)]
    batch = TrajectoryBatch(
        model_name=model.name,
        scheme=scheme,
        dt=dt,
        horizon=horizon,
        seed=seed,
        taus=result.taus,
        absorbed=result.absorbed,
        faces=result.faces,
        finals=result.finals,
        deviations=result.deviations,
    )
    logger.info(
        "Step: deviation_batch done model=%s N=%s count=%s mean_DN=%.6g elapsed=%.3fs",
        model.name,
        model.n_size,
        count,
        float(result.deviations.mean()),
        perf_counter() - started_at,
    )
    return stats, batch


def sigma_sup_norm(model: ModelSpec, points: int | None = None) -> float:
    """Max operator norm of σ(x) over an interior lattice of about `points` points."""
    target = points or settings.sigma_norm_points
    resolution = model.d
    while True:
        lattice = lattice_compositions(model.d, resolution)
        interior = lattice[lattice.min(axis=1) > 0]
        if interior.shape[0] >= target:
            break
        resolution += 1
    grid = interior / float(resolution)
    norms = np.linalg.norm(model.sigma_values(grid), ord=2, axis=(1, 2))
    return float(norms.max())
