from __future__ import annotations

import math

from scipy import stats

from app.config import settings


def z_value(level: float | None = None) -> float:
    """Two-sided standard normal quantile for the confidence level."""
    confidence = settings.confidence_level if level is None else level
    return float(stats.norm.ppf(1.0 - (1.0 - confidence) / 2.0))


def t_value(dof: int, level: float | None = None) -> float:
    confidence = settings.confidence_level if level is None else level
    return float(stats.t.ppf(1.0 - (1.0 - confidence) / 2.0, dof))


def wilson_interval(successes: int, trials: int, level: float | None = None) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("Wilson interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")
    z = z_value(level)
    p = successes / trials
    denominator = 1.0 + z**2 / trials
    center = (p + z**2 / (2.0 * trials)) / denominator
    half = z * math.sqrt(p * (1.0 - p) / trials + z**2 / (4.0 * trials**2)) / denominator
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return min(low, p), max(high, p)


def proportion_standard_error(successes: int, trials: int) -> float:
    p = successes / trials
    return math.sqrt(p * (1.0 - p) / trials)
