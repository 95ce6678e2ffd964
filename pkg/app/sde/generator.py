from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from app.config import settings
from app.models.simplex import SimplexPoint, validate_simplex
from app.models.spec import ModelSpec
from app.sde.rng import ORACLE_STREAM, auxiliary_generator
from app.sde.simulator import Scheme, check_scheme, euler_step
from app.utils.errors import InsufficientDataError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestFunction:
    """Scalar test function f on R^d, evaluated on (n, d) batches.

    `gradient` maps a point to a d-vector and `hessian` to a (d, d) matrix.
    When either is missing, apply_generator falls back to central differences
    along the tangent plane of the simplex.
    """

    __test__ = False

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.value(np.atleast_2d(x)), dtype=float)


def tangent_basis(d: int) -> np.ndarray:
    """(d, d-1) matrix with columns (e_k - e_d)/√2."""
    basis = np.zeros((d, d - 1))
    for k in range(d - 1):
        basis[k, k] = 1.0
        basis[d - 1, k] = -1.0
    return basis / np.sqrt(2.0)


def _finite_difference_terms(f: TestFunction, x: np.ndarray, basis: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Directional gradient and Hessian of f along the tangent basis."""
    m = basis.shape[1]
    steps = h * basis.T
    center = float(f(x)[0])
    gradient = np.empty(m)
    hessian = np.empty((m, m))
    for a in range(m):
        plus, minus = f(np.stack([x + steps[a], x - steps[a]]))
        gradient[a] = (plus - minus) / (2.0 * h)
        hessian[a, a] = (plus - 2.0 * center + minus) / h**2
        for b in range(a + 1, m):
            corners = f(
                np.stack(
                    [
                        x + steps[a] + steps[b],
                        x + steps[a] - steps[b],
                        x - steps[a] + steps[b],
                        x - steps[a] - steps[b],
                    ]
                )
            )
            mixed = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * h**2)
            hessian[a, b] = hessian[b, a] = mixed
    return gradient, hessian


def apply_generator(
    model: ModelSpec,
    f: TestFunction,
    x: SimplexPoint | Sequence[float] | np.ndarray,
) -> float:
    """Lf(x) = <x∘F(x), ∇f> + (1/2N) Tr(D²f(x) Σ(x)) at an interior point."""
    point = validate_simplex(x.coords if isinstance(x, SimplexPoint) else x).as_array()
    drift = model.drift_field(point)
    spread = model.diffusion_matrix(point)
    scale = 1.0 / (2.0 * model.n_size)

    if f.gradient is not None and f.hessian is not None:
        gradient = np.asarray(f.gradient(point), dtype=float)
        hessian = np.asarray(f.hessian(point), dtype=float)
        covariance = spread @ spread.T
        return float(drift @ gradient + scale * np.trace(hessian @ covariance))

    h = settings.fd_step
    if point.min() < 2.0 * h:
        raise PreconditionError(
            f"point {point.tolist()} is within {2.0 * h:g} of the boundary; "
            "the finite-difference stencil would leave the simplex"
        )
    basis = tangent_basis(model.d)
    drift_coords = np.linalg.lstsq(basis, drift, rcond=None)[0]
    spread_coords = np.linalg.lstsq(basis, spread, rcond=None)[0]
    gradient, hessian = _finite_difference_terms(f, point, basis, h)
    covariance = spread_coords @ spread_coords.T
    return float(drift_coords @ gradient + scale * np.sum(hessian * covariance))


def generator_monte_carlo(
    model: ModelSpec,
    f: TestFunction,
    x: SimplexPoint | Sequence[float] | np.ndarray,
    dt: float,
    samples: int,
    seed: int,
    scheme: Scheme = "euler_clamp",
) -> tuple[float, float]:
    """One-step estimate of E[f(X_dt) - f(x)]/dt and its standard error."""
    check_scheme(scheme)
    if samples < 2:
        raise InsufficientDataError("the Monte Carlo oracle needs at least 2 samples")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    point = validate_simplex(x.coords if isinstance(x, SimplexPoint) else x).as_array()
    rng = auxiliary_generator(seed, ORACLE_STREAM)
    starts = np.tile(point, (samples, 1))
    increments = rng.standard_normal((samples, model.l)) * np.sqrt(dt)
    step = euler_step(model, starts, increments, dt, scheme, model.absorption_threshold)
    increments_f = (f(step.states) - f(point)[0]) / dt
    estimate = float(increments_f.mean())
    error = float(increments_f.std(ddof=1) / np.sqrt(samples))
    logger.debug("Generator oracle dt=%s samples=%s estimate=%.6g se=%.3g", dt, samples, estimate, error)
    return estimate, error
