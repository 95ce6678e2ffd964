from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

from app.flow.integrator import flow_time_average
from app.models.measure import WeightedSamples
from app.models.simplex import barycenter
from app.models.spec import ModelSpec
from app.qsd.estimate import QsdEstimate
from app.qsd.fleming_viot import fleming_viot
from app.sde.simulator import Scheme
from app.stats.distances import DistanceReport, TrendReport, compare_measures, distance_trend

logger = logging.getLogger(__name__)

InvariantKind = Literal["dirac", "time_average"]


def qsd_vs_invariant(
    qsd: QsdEstimate | WeightedSamples,
    invariant: WeightedSamples,
    seed: int = 0,
) -> DistanceReport:
    samples = qsd.samples if isinstance(qsd, QsdEstimate) else qsd
    return compare_measures(samples, invariant, seed=seed)


def invariant_reference(
    model: ModelSpec,
    kind: InvariantKind = "dirac",
    horizon: float = 200.0,
    dt: float = 0.01,
    burn_in: float = 50.0,
) -> WeightedSamples:
    """Concrete flow-invariant measure: a Dirac at the attractor hint, or the
    time-average of the flow started off the barycenter."""
    if kind == "dirac":
        if not model.attractor_hint:
            raise ValueError(f"model {model.name} declares no attractor point for a Dirac reference")
        return WeightedSamples.dirac(tuple(model.attractor_hint[0]))
    if kind == "time_average":
        start = barycenter(model.d).as_array()
        start[0] += 0.5 * start[1]
        start[1] *= 0.5
        return flow_time_average(model, start, horizon, dt, burn_in)
    raise ValueError(f"Unsupported invariant reference {kind!r}. Use dirac or time_average.")


@dataclass(frozen=True)
class ConvergenceStudy:
    estimates: tuple[QsdEstimate, ...]
    trend: TrendReport


def convergence_study(
    model: ModelSpec,
    n_values: Sequence[int],
    invariant: WeightedSamples,
    particles: int,
    horizon: float,
    dt: float,
    burn_in: float | None = None,
    seed: int = 0,
    scheme: Scheme = "euler_clamp",
    min_relative_margin: float = 0.0,
) -> ConvergenceStudy:
    """Fleming–Viot QSD per N and its distance trend towards `invariant`."""
    if len(n_values) < 2:
        raise ValueError("a convergence study needs at least two N values")
    estimates = []
    reports = []
    for n in n_values:
        estimate = fleming_viot(
            model.with_size(n), particles, horizon, dt, burn_in=burn_in, seed=seed, scheme=scheme
        )
        estimates.append(estimate)
        report = qsd_vs_invariant(estimate, invariant, seed=seed)
        reports.append(report)
        logger.info("QSD distance N=%s distance=%.6g metric=%s", n, report.distance, report.metric)
    trend = distance_trend(
        [float(n) for n in n_values], reports, min_relative_margin, claim="qsd_to_invariant_trend"
    )
    return ConvergenceStudy(estimates=tuple(estimates), trend=trend)
