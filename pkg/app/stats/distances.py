from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from app.config import settings
from app.models.measure import WeightedSamples
from app.sde.rng import BOOTSTRAP_STREAM, auxiliary_generator
from app.stats.verdicts import Verdict

logger = logging.getLogger(__name__)

Metric = Literal["w1_marginal", "energy"]

ENERGY_MAX_POINTS = 1500


@dataclass(frozen=True)
class DistanceReport:
    distance: float
    ci_low: float
    ci_high: float
    metric: Metric

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass(frozen=True)
class TrendReport:
    """Distances along a ladder with relative margins (d_k - d_{k+1}) / d_k."""

    labels: tuple[float, ...]
    reports: tuple[DistanceReport, ...]
    margins: tuple[float, ...]
    verdict: Verdict

    def header(self) -> list[str]:
        return ["label", "distance", "ci_low", "ci_high", "metric"]

    def rows(self) -> list[list[float | str]]:
        return [
            [label, report.distance, report.ci_low, report.ci_high, report.metric]
            for label, report in zip(self.labels, self.reports)
        ]


def metric_for(d: int) -> Metric:
    return "w1_marginal" if d == 2 else "energy"


def _energy(a: WeightedSamples, b: WeightedSamples) -> float:
    a = a.thinned(ENERGY_MAX_POINTS)
    b = b.thinned(ENERGY_MAX_POINTS)
    cross = a.weights @ cdist(a.points, b.points) @ b.weights
    within_a = a.weights @ cdist(a.points, a.points) @ a.weights
    within_b = b.weights @ cdist(b.points, b.points) @ b.weights
    return math.sqrt(max(0.0, 2.0 * cross - within_a - within_b))


def measure_distance(a: WeightedSamples, b: WeightedSamples) -> float:
    """W1 between first-coordinate marginals when d = 2, energy distance otherwise."""
    if a.d != b.d:
        raise ValueError(f"cannot compare measures of dimension {a.d} and {b.d}")
    if a.d == 2:
        return float(stats.wasserstein_distance(a.marginal(0), b.marginal(0), a.weights, b.weights))
    return _energy(a, b)


def _resample(samples: WeightedSamples, rng: np.random.Generator) -> WeightedSamples:
    return WeightedSamples.uniform(samples.draw(rng, len(samples)))


def compare_measures(a: WeightedSamples, b: WeightedSamples, seed: int = 0) -> DistanceReport:
    """Distance with a percentile bootstrap interval at settings.confidence_level.

    A side with a single point (a Dirac) is not resampled.
    """
    if a.d != b.d:
        raise ValueError(f"cannot compare measures of dimension {a.d} and {b.d}")
    a = a.thinned(settings.distance_max_points)
    b = b.thinned(settings.distance_max_points)
    estimate = measure_distance(a, b)
    rng = auxiliary_generator(seed, BOOTSTRAP_STREAM)
    replicates = np.empty(settings.bootstrap_resamples)
    for k in range(replicates.size):
        left = _resample(a, rng) if len(a) > 1 else a
        right = _resample(b, rng) if len(b) > 1 else b
        replicates[k] = measure_distance(left, right)
    tail = 50.0 * (1.0 - settings.confidence_level)
    low, high = np.percentile(replicates, [tail, 100.0 - tail])
    return DistanceReport(
        distance=estimate,
        ci_low=float(min(low, estimate)),
        ci_high=float(max(high, estimate)),
        metric=metric_for(a.d),
    )


def distance_trend(
    labels: Sequence[float],
    reports: Sequence[DistanceReport],
    min_relative_margin: float = 0.0,
    claim: str = "distance_trend",
) -> TrendReport:
    """Strict decrease along the ladder, each step by more than `min_relative_margin`."""
    if len(labels) != len(reports):
        raise ValueError("one distance report is needed per ladder entry")
    if len(reports) < 2:
        raise ValueError("a distance trend needs at least two entries")
    margins = []
    for prev, nxt in zip(reports, reports[1:]):
        margins.append((prev.distance - nxt.distance) / prev.distance if prev.distance > 0 else -math.inf)
    worst = min(margins)
    status = "PASS" if all(m > min_relative_margin for m in margins) else "FAIL"
    verdict = Verdict(claim, status, worst, min_relative_margin, note="minimum relative decrease")
    logger.info("Distance trend labels=%s margins=%s status=%s", list(labels), margins, status)
    return TrendReport(tuple(float(x) for x in labels), tuple(reports), tuple(margins), verdict)


def eps_stability(
    estimates_by_eps: Mapping[float, WeightedSamples],
    reference: WeightedSamples,
    seed: int = 0,
) -> TrendReport:
    """Distances of the ε-killed estimates to the unkilled one along decreasing ε.

    A step passes when the next distance does not exceed the previous one by
    more than the combined bootstrap half-widths.
    """
    ladder = sorted(estimates_by_eps, reverse=True)
    if len(ladder) < 2:
        raise ValueError("eps stability needs at least two killing margins")
    reports = [compare_measures(estimates_by_eps[eps], reference, seed=seed) for eps in ladder]
    margins = []
    worst_excess = -math.inf
    for prev, nxt in zip(reports, reports[1:]):
        tolerance = math.hypot(prev.half_width, nxt.half_width)
        excess = nxt.distance - prev.distance - tolerance
        worst_excess = max(worst_excess, excess)
        margins.append((prev.distance - nxt.distance) / prev.distance if prev.distance > 0 else 0.0)
    status = "PASS" if worst_excess <= 0 else "FAIL"
    verdict = Verdict("eps_stability", status, worst_excess, 0.0, note="largest increase beyond tolerance")
    logger.info("Eps stability ladder=%s distances=%s status=%s", ladder, [r.distance for r in reports], status)
    return TrendReport(tuple(ladder), tuple(reports), tuple(margins), verdict)
