from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from app.config import settings
from app.models.spec import ModelSpec
from app.qsd.estimate import QsdEstimate
from app.sde.simulator import Scheme, TrajectoryBatch, simulate_batch
from app.utils.errors import InsufficientDataError, PreconditionError

logger = logging.getLogger(__name__)

CENSORING_LIMIT = 0.01
CENSORED_WIDENING = 1.5
DEFAULT_HORIZON_FACTOR = 20.0


@dataclass(frozen=True)
class ThetaFit:
    """Survival rate fitted to absorption times started from a QSD estimate."""

    theta: float
    standard_error: float
    ci_low: float
    ci_high: float
    ks_distance: float
    mean_tau: float
    censored_fraction: float
    widened: bool
    batch: TrajectoryBatch

    @property
    def samples(self) -> int:
        return self.batch.count


def _rate_interval(events: int, exposure: float, level: float) -> tuple[float, float]:
    """Exact chi-square interval for an exponential rate with `events` failures."""
    tail = (1.0 - level) / 2.0
    low = stats.chi2.ppf(tail, 2 * events) / (2.0 * exposure)
    high = stats.chi2.ppf(1.0 - tail, 2 * events + 2) / (2.0 * exposure)
    return float(low), float(high)


def theta_from_qsd(
    model: ModelSpec,
    estimate: QsdEstimate,
    dt: float,
    seed: int,
    samples: int,
    horizon: float | None = None,
    scheme: Scheme = "euler_clamp",
    workers: int | None = None,
) -> ThetaFit:
    """Start `samples` paths from the estimate, run them to absorption and fit theta.

    theta is the censored-exponential MLE (absorptions / total observed time),
    which equals 1/mean(tau) when every path is absorbed. More than 1% of
    paths surviving the horizon widens the interval and logs a warning.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if np.any(estimate.points.min(axis=1) <= model.absorption_threshold):
        raise PreconditionError("QSD estimate support touches the boundary; absorption times are undefined")
    if horizon is None:
        horizon = DEFAULT_HORIZON_FACTOR / estimate.theta if estimate.theta > 0 else 1e3

    batch = simulate_batch(
        model,
        estimate.samples,
        horizon,
        dt,
        scheme=scheme,
        seed=seed,
        count=samples,
        workers=workers,
    )
    events = int(batch.absorbed.sum())
    if events == 0:
        raise InsufficientDataError(f"no path was absorbed before horizon {horizon:g}; theta cannot be fitted")
    exposure = float(batch.observed_times.sum())
    theta = events / exposure
    censored = 1.0 - events / batch.count
    low, high = _rate_interval(events, exposure, settings.confidence_level)
    widened = censored > CENSORING_LIMIT
    if widened:
        logger.warning(
            "%.2f%% of paths survived horizon %g; widening the theta interval",
            100.0 * censored,
            horizon,
        )
        low = max(0.0, theta - CENSORED_WIDENING * (theta - low))
        high = theta + CENSORED_WIDENING * (high - theta)
    ks = stats.kstest(batch.absorbed_taus, "expon", args=(0.0, 1.0 / theta)).statistic
    fit = ThetaFit(
        theta=theta,
        standard_error=theta / math.sqrt(events),
        ci_low=low,
        ci_high=high,
        ks_distance=float(ks),
        mean_tau=batch.mean_tau(),
        censored_fraction=censored,
        widened=widened,
        batch=batch,
    )
    logger.info(
        "Theta fit model=%s N=%s theta=%.6g ci=[%.6g, %.6g] ks=%.4g censored=%.4g",
        model.name,
        model.n_size,
        theta,
        low,
        high,
        fit.ks_distance,
        censored,
    )
    return fit
