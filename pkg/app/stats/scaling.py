from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from app.flow.attractor import AttractorProbe
from app.models.spec import ModelSpec
from app.qsd.fleming_viot import fleming_viot
from app.qsd.theta import theta_from_qsd
from app.sde.simulator import Scheme
from app.stats.intervals import t_value, z_value
from app.stats.verdicts import Verdict
from app.utils.errors import PreconditionError

logger = logging.getLogger(__name__)

SLOPE_FLOOR = 0.9


@dataclass(frozen=True)
class ScalingRow:
    n_size: int
    theta: float
    theta_se: float
    mean_tau: float
    mean_tau_se: float

    @property
    def n_theta(self) -> float:
        return self.n_size * self.theta

    @property
    def n_theta_se(self) -> float:
        return self.n_size * self.theta_se


@dataclass(frozen=True)
class ScalingReport:
    """Growth of the mean absorption time from the QSD with the system size."""

    rows: tuple[ScalingRow, ...]
    slope: float
    intercept: float
    slope_ci: tuple[float, float]
    verdicts: tuple[Verdict, ...]

    @property
    def n_values(self) -> list[int]:
        return [row.n_size for row in self.rows]

    def header(self) -> list[str]:
        return ["N", "theta", "theta_se", "mean_tau", "mean_tau_se", "N_theta", "N_theta_se"]

    def csv_rows(self) -> list[list[float | int]]:
        return [
            [r.n_size, r.theta, r.theta_se, r.mean_tau, r.mean_tau_se, r.n_theta, r.n_theta_se]
            for r in self.rows
        ]


def fit_log_slope(rows: Sequence[ScalingRow]) -> tuple[float, float, tuple[float, float]]:
    """Least squares slope of log E[τ] on log N with a confidence interval.

    With three or more points the interval uses the regression standard error
    and Student t; with two points it propagates the per-point standard errors.
    """
    x = np.log([row.n_size for row in rows])
    y = np.log([row.mean_tau for row in rows])
    fit = stats.linregress(x, y)
    slope = float(fit.slope)
    if len(rows) > 2:
        half = t_value(len(rows) - 2) * float(fit.stderr)
    else:
        relative = [row.mean_tau_se / row.mean_tau for row in rows]
        half = z_value() * math.hypot(*relative) / abs(x[1] - x[0])
    return slope, float(fit.intercept), (slope - half, slope + half)


def _n_theta_verdict(rows: Sequence[ScalingRow]) -> Verdict:
    z = z_value()
    worst = -math.inf
    for prev, nxt in zip(rows, rows[1:]):
        tolerance = z * math.hypot(prev.n_theta_se, nxt.n_theta_se)
        worst = max(worst, nxt.n_theta - prev.n_theta - tolerance)
    return Verdict(
        "scaling_n_theta_nonincreasing",
        "PASS" if worst <= 0 else "FAIL",
        worst,
        0.0,
        note="largest increase of N*theta beyond error bars",
    )


def scaling_study(
    model: ModelSpec,
    n_values: Sequence[int],
    probe: AttractorProbe | None,
    particles: int,
    horizon: float,
    dt: float,
    burn_in: float | None = None,
    seed: int = 0,
    theta_samples: int = 1000,
    scheme: Scheme = "euler_clamp",
    workers: int | None = None,
) -> ScalingReport:
    """Fleming–Viot QSD per N, then the log–log slope of E[τ] against N.

    Refused without a successful interior attractor probe. E[τ] is measured
    from `theta_samples` paths started at each particle ensemble, so the
    slope does not reuse the particle estimate of θ.
    """
    if probe is None:
        raise PreconditionError(
            f"scaling study on {model.name} needs an interior attractor; run probe_attractor first"
        )
    if len(n_values) < 2:
        raise ValueError("scaling study needs at least two N values to fit a slope")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError(f"N values must be strictly increasing, got {list(n_values)}")
    if theta_samples < 1:
        raise ValueError(f"theta_samples must be >= 1 to measure absorption times, got {theta_samples}")

    rows: list[ScalingRow] = []
    for n in n_values:
        sized = model.with_size(n)
        estimate = fleming_viot(sized, particles, horizon, dt, burn_in=burn_in, seed=seed, scheme=scheme)
        if estimate.theta <= 0:
            raise PreconditionError(f"no absorption observed at N={n}; lengthen the horizon or lower N")
        fit = theta_from_qsd(sized, estimate, dt, seed, theta_samples, scheme=scheme, workers=workers)
        events = int(fit.batch.absorbed.sum())
        mean_tau = 1.0 / fit.theta
        mean_tau_se = mean_tau / math.sqrt(events)
        rows.append(
            ScalingRow(
                n_size=n,
                theta=estimate.theta,
                theta_se=estimate.theta_se,
                mean_tau=mean_tau,
                mean_tau_se=mean_tau_se,
            )
        )
        logger.info("Scaling point N=%s theta=%.6g mean_tau=%.6g", n, estimate.theta, mean_tau)

    slope, intercept, ci = fit_log_slope(rows)
    slope_verdict = Verdict(
        "scaling_slope",
        "PASS" if ci[0] >= SLOPE_FLOOR else "FAIL",
        slope,
        SLOPE_FLOOR,
        ci,
        note="lower confidence bound of log-log slope",
    )
    logger.info("Scaling fit slope=%.6g ci=[%.6g, %.6g] intercept=%.6g", slope, ci[0], ci[1], intercept)
    return ScalingReport(
        rows=tuple(rows),
        slope=slope,
        intercept=intercept,
        slope_ci=ci,
        verdicts=(slope_verdict, _n_theta_verdict(rows)),
    )
