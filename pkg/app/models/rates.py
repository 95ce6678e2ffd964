from __future__ import annotations

import logging
from itertools import combinations

import numpy as np

from app.models.spec import ModelSpec, RateSpec
from app.utils.errors import ModelError

logger = logging.getLogger(__name__)


def pair_channels(d: int) -> list[tuple[int, int]]:
    """Unordered strategy pairs (i < j); one noise channel per pair."""
    return list(combinations(range(d), 2))


def from_rates(
    rates: RateSpec,
    n_size: int = 1,
    name: str = "custom",
    lipschitz_bound: float = 0.0,
    ellipticity_floor: float = 0.0,
) -> ModelSpec:
    """Build the diffusion approximation of the imitation chain with rates `rates`.

    Drift: F_i(x) = sum_j x_j (lambda_ji(x) - lambda_ij(x)), so x∘F equals
    G_i = sum_j (p_ji - p_ij).
    Diffusion: channel c = {i, j} carries sigma_ic = -sqrt(x_j) s_ij and
    sigma_jc = +sqrt(x_i) s_ij with s_ij = sqrt(lambda_ij + lambda_ji), so that
    sqrt(x)∘sigma reassembles a(x) = sum_{i<j} (e_j - e_i)(e_j - e_i)^T (p_ij + p_ji)
    and sum_i sqrt(x_i) sigma_ic = 0 holds identically.
    """
    d = rates.d
    if d < 2:
        raise ModelError(f"rate model needs d >= 2 strategies, got d={d}")
    pairs = pair_channels(d)
    first = np.array([i for i, _ in pairs], dtype=np.int64)
    second = np.array([j for _, j in pairs], dtype=np.int64)
    channel = np.arange(len(pairs))

    def drift(x: np.ndarray) -> np.ndarray:
        table = rates.evaluate(x)
        net = np.swapaxes(table, 1, 2) - table
        return (x[:, None, :] * net).sum(axis=-1)

    def sigma(x: np.ndarray) -> np.ndarray:
        table = rates.evaluate(x)
        root = np.sqrt(np.maximum(x, 0.0))
        strength = np.sqrt(table[:, first, second] + table[:, second, first])
        out = np.zeros((x.shape[0], d, len(pairs)))
        out[:, first, channel] = -root[:, second] * strength
        out[:, second, channel] = root[:, first] * strength
        return out

    logger.debug("Built rate model name=%s d=%s channels=%s", name, d, len(pairs))
    return ModelSpec(
        d=d,
        l=len(pairs),
        drift=drift,
        sigma=sigma,
        n_size=n_size,
        lipschitz_bound=lipschitz_bound,
        ellipticity_floor=ellipticity_floor,
        name=name,
    )
