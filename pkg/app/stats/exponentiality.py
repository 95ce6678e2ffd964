from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from app.utils.errors import InsufficientDataError

logger = logging.getLogger(__name__)

# Stephens' critical values of the modified KS statistic for an exponential
# law with estimated mean, keyed by significance level.
STEPHENS_CRITICAL = {0.15: 0.926, 0.10: 0.990, 0.05: 1.094, 0.025: 1.190, 0.01: 1.308}
LILLIEFORS_FACTOR = 1.08
MIN_SAMPLES = 100


@dataclass(frozen=True)
class ExponentialityResult:
    statistic: float
    modified_statistic: float
    critical_value: float
    rate: float
    level: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.modified_statistic <= self.critical_value


def modified_statistic(distance: float, n: int) -> float:
    root = math.sqrt(n)
    return (distance - 0.2 / n) * (root + 0.26 + 0.5 / root)


def exponentiality_test(taus: Sequence[float] | np.ndarray, level: float = 0.01) -> ExponentialityResult:
    """KS test of an exponential law with rate fitted as 1/mean.

    The statistic is compared with Stephens' critical value for estimated
    parameters, multiplied by LILLIEFORS_FACTOR.
    """
    values = np.asarray(taus, dtype=float)
    if values.size < MIN_SAMPLES:
        raise InsufficientDataError(f"exponentiality test needs >= {MIN_SAMPLES} samples, got {values.size}")
    if level not in STEPHENS_CRITICAL:
        raise ValueError(f"Unsupported level {level}. Use one of: {', '.join(map(str, STEPHENS_CRITICAL))}.")
    if not np.all(np.isfinite(values)) or values.min() < 0:
        raise ValueError("absorption times must be finite and nonnegative")
    mean = float(values.mean())
    if mean <= 0:
        raise InsufficientDataError("all absorption times are zero; no rate can be fitted")
    distance = float(stats.kstest(values, "expon", args=(0.0, mean)).statistic)
    result = ExponentialityResult(
        statistic=distance,
        modified_statistic=modified_statistic(distance, values.size),
        critical_value=STEPHENS_CRITICAL[level] * LILLIEFORS_FACTOR,
        rate=1.0 / mean,
        level=level,
        samples=int(values.size),
    )
    logger.info(
        "Exponentiality test n=%s D=%.5g modified=%.5g critical=%.5g passed=%s",
        result.samples,
        distance,
        result.modified_statistic,
        result.critical_value,
        result.passed,
    )
    return result
