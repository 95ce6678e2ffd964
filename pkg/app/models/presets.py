from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from app.models.rates import from_rates
from app.models.spec import DriftFn, ModelSpec, NoiseForm, RateSpec
from app.utils.errors import ModelError

HAWK_DOVE_PAYOFF = np.array([[0.0, 2.0], [1.0, 0.0]])
RPS_PAYOFF = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])

PRESET_NAMES: tuple[str, ...] = ("logistic1d", "hawk_dove", "rps")


def replicator_drift(payoff: np.ndarray) -> DriftFn:
    """F_i(x) = (Ax)_i - x^T A x for a payoff matrix A."""
    matrix = np.asarray(payoff, dtype=float)

    def drift(x: np.ndarray) -> np.ndarray:
        # broadcast instead of matmul: per-row values must not depend on batch size
        fitness = (x[:, None, :] * matrix[None, :, :]).sum(axis=-1)
        average = (x * fitness).sum(axis=-1, keepdims=True)
        return fitness - average

    return drift


def uniform_rates(d: int, intensity: float) -> RateSpec:
    table = np.full((d, d), float(intensity))
    np.fill_diagonal(table, 0.0)
    return RateSpec.constant(table)


def rate_table_model(table: Sequence[Sequence[float]], n_size: int = 1, noise_form: NoiseForm = "sqrt") -> ModelSpec:
    """Model built from a constant lambda_ij table (CLI `rates = ...`)."""
    matrix = np.asarray(table, dtype=float)
    net = matrix.T - matrix
    lipschitz = float(np.linalg.norm(net, ord=2))
    model = from_rates(RateSpec.constant(matrix), n_size=n_size, name="rates", lipschitz_bound=lipschitz)
    return model.with_noise_form(noise_form)


def builtin(
    name: str,
    n_size: int = 1,
    noise_form: NoiseForm = "sqrt",
    noise_intensity: float | None = None,
) -> ModelSpec:
    """Select and instantiate a named model preset.

    - logistic1d: dX = X(1-X)dt + sqrt(X(1-X))dB embedded in the 2-simplex,
      built from lambda_12 = 0, lambda_21 = 1.
    - hawk_dove: replicator drift with payoff [[0,2],[1,0]] (interior attractor
      at x1 = 2/3) and a constant-lambda pair channel (default lambda = 2).
    - rps: zero-sum rock-paper-scissors replicator with a constant-lambda pair
      channel (default lambda = 1); the barycenter is a neutral center.
    """
    if name == "logistic1d":
        model = from_rates(
            RateSpec.constant([[0.0, 0.0], [1.0, 0.0]]),
            n_size=n_size,
            name=name,
            lipschitz_bound=1.0,
        )
        return ModelSpec(
            d=model.d,
            l=model.l,
            drift=model.drift,
            sigma=model.sigma,
            n_size=n_size,
            lipschitz_bound=model.lipschitz_bound,
            name=name,
            noise_form=noise_form,
            attractor_hint=((1.0, 0.0),),
        )
    if name == "hawk_dove":
        channel = from_rates(uniform_rates(2, 2.0 if noise_intensity is None else noise_intensity))
        return ModelSpec(
            d=2,
            l=channel.l,
            drift=replicator_drift(HAWK_DOVE_PAYOFF),
            sigma=channel.sigma,
            n_size=n_size,
            lipschitz_bound=6.0,
            name=name,
            noise_form=noise_form,
            attractor_hint=((2.0 / 3.0, 1.0 / 3.0),),
        )
    if name == "rps":
        channel = from_rates(uniform_rates(3, 1.0 if noise_intensity is None else noise_intensity))
        return ModelSpec(
            d=3,
            l=channel.l,
            drift=replicator_drift(RPS_PAYOFF),
            sigma=channel.sigma,
            n_size=n_size,
            lipschitz_bound=2.0,
            name=name,
            noise_form=noise_form,
            attractor_hint=((1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),),
        )
    raise ModelError(f"Unsupported model preset {name!r}. Use one of: {', '.join(PRESET_NAMES)}.")
