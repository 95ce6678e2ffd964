from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from app.models.measure import WeightedSamples
from app.models.simplex import SimplexPoint
from app.models.spec import ModelSpec
from app.qsd.estimate import QsdEstimate
from app.sde.simulator import Scheme, simulate_batch
from app.utils.errors import QsdError

logger = logging.getLogger(__name__)


def pruning_estimate(
    model: ModelSpec,
    x0: SimplexPoint | Sequence[float] | np.ndarray,
    t: float,
    dt: float,
    seed: int,
    trials: int,
    scheme: Scheme = "euler_clamp",
    workers: int | None = None,
) -> QsdEstimate:
    """Conditional law of X_t given survival, from independent trials started at x0.

    theta = -log(survivors / trials) / t, floored at 0.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    batch = simulate_batch(model, x0, t, dt, scheme=scheme, seed=seed, count=trials, workers=workers)
    survivors = batch.survivors
    if survivors.shape[0] == 0:
        raise QsdError(f"no path of {trials} survived to t={t:g}; use a smaller t or more trials")
    fraction = survivors.shape[0] / trials
    theta = max(0.0, -math.log(fraction) / t)
    theta_se = math.sqrt((1.0 - fraction) / (fraction * trials)) / t
    logger.info(
        "Pruning estimate model=%s t=%s survivors=%s/%s theta=%.6g",
        model.name,
        t,
        survivors.shape[0],
        trials,
        theta,
    )
    return QsdEstimate(
        samples=WeightedSamples.uniform(survivors),
        theta=theta,
        theta_se=theta_se,
        method="pruning",
        killing_margin=0.0,
        burn_in=t,
        particles=trials,
        n_size=model.n_size,
        model_name=model.name,
        events=trials - survivors.shape[0],
    )
