from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from app.models.simplex import SimplexPoint
from app.models.spec import ModelSpec
from app.sde.deviation import deviation_batch, exceedance, mean_deviation, sigma_sup_norm
from app.sde.simulator import Scheme
from app.stats.intervals import wilson_interval
from app.stats.verdicts import Verdict, VerdictStatus, upper_bound_verdict

logger = logging.getLogger(__name__)


def lln_bound(horizon: float, sigma_norm: float, n_size: int, delta: float) -> float:
    """T ||σ||∞ / (N δ)."""
    return horizon * sigma_norm / (n_size * delta)


def lln_gronwall_bound(horizon: float, sigma_norm: float, lipschitz: float, n_size: int, delta: float) -> float:
    """T ||σ||∞ e^{LT} / (N δ²), the Chebyshev form with the Gronwall factor."""
    return horizon * sigma_norm * math.exp(lipschitz * horizon) / (n_size * delta**2)


@dataclass(frozen=True)
class LlnRow:
    n_size: int
    delta: float
    exceedances: int
    count: int
    probability: float
    ci_low: float
    ci_high: float
    bound: float
    gronwall_bound: float
    status: VerdictStatus
    mean_deviation: float
    mean_deviation_se: float


@dataclass(frozen=True)
class LlnReport:
    horizon: float
    sigma_norm: float
    rows: tuple[LlnRow, ...]
    verdicts: tuple[Verdict, ...]

    def header(self) -> list[str]:
        return [
            "N",
            "delta",
            "exceedances",
            "count",
            "p",
            "ci_low",
            "ci_high",
            "bound",
            "bound_gronwall",
            "status",
            "mean_DN",
            "mean_DN_se",
        ]

    def csv_rows(self) -> list[list[float | int | str]]:
        return [
            [
                r.n_size,
                r.delta,
                r.exceedances,
                r.count,
                r.probability,
                r.ci_low,
                r.ci_high,
                r.bound,
                r.gronwall_bound,
                r.status,
                r.mean_deviation,
                r.mean_deviation_se,
            ]
            for r in self.rows
        ]


def lln_bound_check(
    model: ModelSpec,
    x0: SimplexPoint | Sequence[float] | np.ndarray,
    horizon: float,
    deltas: Sequence[float],
    n_values: Sequence[int],
    dt: float,
    seed: int,
    count: int,
    scheme: Scheme = "euler_clamp",
    workers: int | None = None,
) -> LlnReport:
    """Exceedance probabilities P[D_N(T) >= δ] against T||σ||∞/(Nδ) per (N, δ).

    One deviation batch is simulated per N and shared by every δ. Rows whose
    bound is >= 1 are VACUOUS. For each δ the exceedance must also drop
    strictly from one N to the next (or already be zero).
    """
    if not deltas or any(delta <= 0 for delta in deltas):
        raise ValueError("deltas must be a nonempty list of positive values")
    if not n_values:
        raise ValueError("at least one N value is required")
    sigma_norm = sigma_sup_norm(model)
    rows: list[LlnRow] = []
    verdicts: list[Verdict] = []
    for n in n_values:
        sized = model.with_size(n)
        stats, _ = deviation_batch(sized, x0, horizon, dt, seed, count, scheme=scheme, workers=workers)
        mean, mean_se = mean_deviation(stats)
        for delta in deltas:
            hits, total = exceedance(stats, delta)
            low, high = wilson_interval(hits, total)
            bound = lln_bound(horizon, sigma_norm, n, delta)
            verdict = upper_bound_verdict(f"lln_bound N={n} delta={delta:g}", hits / total, bound, (low, high))
            if verdict.status == "VACUOUS":
                logger.warning("LLN bound is vacuous for N=%s delta=%s bound=%.6g", n, delta, bound)
            verdicts.append(verdict)
            rows.append(
                LlnRow(
                    n_size=n,
                    delta=delta,
                    exceedances=hits,
                    count=total,
                    probability=hits / total,
                    ci_low=low,
                    ci_high=high,
                    bound=bound,
                    gronwall_bound=lln_gronwall_bound(horizon, sigma_norm, model.lipschitz_bound, n, delta),
                    status=verdict.status,
                    mean_deviation=mean,
                    mean_deviation_se=mean_se,
                )
            )
    for delta in deltas:
        ladder = [row for row in rows if row.delta == delta]
        for prev, nxt in zip(ladder, ladder[1:]):
            decreasing = nxt.probability < prev.probability or nxt.probability == 0.0
            verdicts.append(
                Verdict(
                    f"lln_trend delta={delta:g} N={prev.n_size}->{nxt.n_size}",
                    "PASS" if decreasing else "FAIL",
                    nxt.probability,
                    prev.probability,
                    (nxt.ci_low, nxt.ci_high),
                )
            )
    logger.info("LLN check sigma_norm=%.6g rows=%s", sigma_norm, len(rows))
    return LlnReport(horizon=horizon, sigma_norm=sigma_norm, rows=tuple(rows), verdicts=tuple(verdicts))
