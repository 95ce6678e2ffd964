"""Principal eigenpair of the one-dimensional killed adjoint problem.

For dX = X(1-X) dt + sqrt(X(1-X)/N) dB on (0, 1), the QSD density g and its
survival rate lambda solve L*g = -lambda g. With h = x(1-x) g this reads

    h''/(2N) - h' = -lambda h / (x(1-x)),    h(0) = h(1) = 0,

which is the Sturm-Liouville problem -(p h')' = lambda r h with
p = exp(-2Nx)/(2N) and r = exp(-2Nx)/(x(1-x)). Two solvers are provided:
finite differences with inverse power iteration ("eigen") and shooting from
both endpoints with a Wronskian match at x = 1/2 ("shooting").
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp, trapezoid
from scipy.linalg import solveh_banded
from scipy.optimize import brentq

from app.models.measure import WeightedSamples
from app.qsd.estimate import QsdEstimate
from app.utils.errors import SpectralError

logger = logging.getLogger(__name__)

SpectralMethod = Literal["eigen", "shooting"]

MIN_GRID_SIZE = 100
POWER_TOLERANCE = 1e-10
POWER_MAX_ITERATIONS = 20000
SHOOTING_START = 1e-4
BRACKET_SCAN_POINTS = 64


@dataclass(frozen=True)
class SpectralSolution:
    """Density g, auxiliary h = x(1-x)g and eigenvalue on [0, 1].

    `grid` holds the endpoints plus n interior nodes k/(n+1); g at the
    endpoints is the one-sided limit h'(0) and -h'(1).
    """

    grid: np.ndarray
    density: np.ndarray
    auxiliary: np.ndarray
    eigenvalue: float
    residual: float
    n_size: int
    method: SpectralMethod
    endpoint_exponents: tuple[float, float]

    @property
    def interior_size(self) -> int:
        return int(self.grid.size - 2)

    def cdf(self) -> np.ndarray:
        values = cumulative_trapezoid(self.density, self.grid, initial=0.0)
        return values / values[-1]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw x1 values from g by inverse-CDF interpolation, as (count, 2) simplex points."""
        u = rng.random(count)
        x = np.interp(u, self.cdf(), self.grid)
        x = np.clip(x, 1e-12, 1.0 - 1e-12)
        return np.stack([x, 1.0 - x], axis=1)

    def to_estimate(self, rng: np.random.Generator, count: int, model_name: str = "logistic1d") -> QsdEstimate:
        return QsdEstimate(
            samples=WeightedSamples.uniform(self.sample(rng, count)),
            theta=self.eigenvalue,
            theta_se=0.0,
            method="spectral",
            particles=count,
            n_size=self.n_size,
            model_name=model_name,
        )

    def as_measure(self) -> WeightedSamples:
        """Interior grid nodes weighted by g, as a measure on the 2-simplex."""
        x = self.grid[1:-1]
        weights = np.maximum(self.density[1:-1], 0.0) * np.gradient(self.grid)[1:-1]
        return WeightedSamples(points=np.stack([x, 1.0 - x], axis=1), weights=weights / weights.sum())

    def header(self) -> list[str]:
        return ["x", "g", "h"]

    def rows(self) -> list[list[float]]:
        return [[float(x), float(g), float(h)] for x, g, h in zip(self.grid, self.density, self.auxiliary)]


def _weight(x: np.ndarray, n_size: int) -> np.ndarray:
    # centred at 1/2 so both ends stay within exp(+-N)
    return np.exp(-2.0 * n_size * (x - 0.5))


def _stiffness(x: np.ndarray, spacing: float, n_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the SPD matrix discretizing -(p h')'."""
    left = _weight(x - 0.5 * spacing, n_size) / (2.0 * n_size)
    right = _weight(x + 0.5 * spacing, n_size) / (2.0 * n_size)
    diagonal = (left + right) / spacing**2
    off = -right[:-1] / spacing**2
    return diagonal, off


def _tridiagonal_apply(diagonal: np.ndarray, off: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = diagonal * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def _discrete_residual(x: np.ndarray, h: np.ndarray, g: np.ndarray, eigenvalue: float, spacing: float, n_size: int) -> float:
    """|lambda g - (-L* g)| / |g| on the interior nodes, using the finite-difference operator."""
    diagonal, off = _stiffness(x, spacing, n_size)
    image = _tridiagonal_apply(diagonal, off, h) / _weight(x, n_size)
    return float(np.linalg.norm(eigenvalue * g - image) / np.linalg.norm(g))


def _endpoint_exponents(grid: np.ndarray, density: np.ndarray) -> tuple[float, float]:
    """Observed power-law exponents of g near 0 and near 1."""
    far = min(11, grid.size - 2)
    if far <= 1:
        return float("nan"), float("nan")
    with np.errstate(divide="ignore", invalid="ignore"):
        near_zero = math.log(density[far] / density[1]) / math.log(grid[far] / grid[1])
        near_one = math.log(density[-1 - far] / density[-2]) / math.log((1.0 - grid[-1 - far]) / (1.0 - grid[-2]))
    return float(near_zero), float(near_one)


def _finish(
    x: np.ndarray,
    h: np.ndarray,
    g_left: float,
    g_right: float,
    eigenvalue: float,
    spacing: float,
    n_size: int,
    method: SpectralMethod,
) -> SpectralSolution:
    if h.sum() < 0:
        h, g_left, g_right = -h, -g_left, -g_right
    grid = np.concatenate([[0.0], x, [1.0]])
    g = np.concatenate([[g_left], h / (x * (1.0 - x)), [g_right]])
    auxiliary = np.concatenate([[0.0], h, [0.0]])
    total = float(trapezoid(g, grid))
    if not np.isfinite(total) or total <= 0:
        raise SpectralError(f"density of the {method} solution cannot be normalized (integral {total!r})")
    g = g / total
    auxiliary = auxiliary / total
    if g.min() < -1e-8 * g.max():
        raise SpectralError(
            f"negative density after normalization (min g = {g.min():.3g}); the solver found a non-principal mode"
        )
    residual = _discrete_residual(x, auxiliary[1:-1], g[1:-1], eigenvalue, spacing, n_size)
    return SpectralSolution(
        grid=grid,
        density=g,
        auxiliary=auxiliary,
        eigenvalue=eigenvalue,
        residual=residual,
        n_size=n_size,
        method=method,
        endpoint_exponents=_endpoint_exponents(grid, g),
    )


def _solve_eigen(x: np.ndarray, spacing: float, n_size: int) -> SpectralSolution:
    diagonal, off = _stiffness(x, spacing, n_size)
    mass = _weight(x, n_size) / (x * (1.0 - x))
    scale = 1.0 / np.sqrt(mass)
    sym_diagonal = diagonal * scale**2
    sym_off = off * scale[:-1] * scale[1:]
    banded = np.zeros((2, x.size))
    banded[0, 1:] = sym_off
    banded[1, :] = sym_diagonal

    v = np.full(x.size, 1.0 / math.sqrt(x.size))
    eigenvalue = float("inf")
    for iteration in range(1, POWER_MAX_ITERATIONS + 1):
        y = solveh_banded(banded, v)
        # Rayleigh quotient of the inverse operator
        eigenvalue = 1.0 / float(v @ y)
        updated = y / np.linalg.norm(y)
        converged = np.linalg.norm(updated - v) <= POWER_TOLERANCE
        v = updated
        if converged:
            logger.debug("Inverse power iteration converged iterations=%s lambda=%.12g", iteration, eigenvalue)
            break
    else:
        raise SpectralError(f"inverse power iteration did not converge in {POWER_MAX_ITERATIONS} iterations")

    h = v * scale
    g_left = (4.0 * h[0] - h[1]) / (2.0 * spacing)
    g_right = (4.0 * h[-1] - h[-2]) / (2.0 * spacing)
    return _finish(x, h, g_left, g_right, eigenvalue, spacing, n_size, "eigen")


def _rhs(n_size: int, eigenvalue: float) -> Callable[[float, np.ndarray], list[float]]:
    def rhs(x: float, y: np.ndarray) -> list[float]:
        h, dh = y
        return [dh, 2.0 * n_size * (dh - eigenvalue * h / (x * (1.0 - x)))]

    return rhs


def _shoot(eigenvalue: float, n_size: int, dense: bool = False) -> tuple[Any, Any]:
    """Integrate from both endpoints with series starts; return both solutions."""
    a = SHOOTING_START
    left_start = [a + n_size * (1.0 - eigenvalue) * a**2, 1.0 + 2.0 * n_size * (1.0 - eigenvalue) * a]
    right_start = [a - n_size * (1.0 + eigenvalue) * a**2, -1.0 + 2.0 * n_size * (1.0 + eigenvalue) * a]
    options = {"method": "DOP853", "rtol": 1e-10, "atol": 1e-12, "dense_output": dense}
    left = solve_ivp(_rhs(n_size, eigenvalue), (a, 0.5), left_start, **options)
    right = solve_ivp(_rhs(n_size, eigenvalue), (1.0 - a, 0.5), right_start, **options)
    if not (left.success and right.success):
        raise SpectralError(f"shooting integration failed at lambda={eigenvalue:g}: {left.message} / {right.message}")
    return left, right


def _mismatch(eigenvalue: float, n_size: int) -> float:
    left, right = _shoot(eigenvalue, n_size)
    h_left, dh_left = left.y[:, -1]
    h_right, dh_right = right.y[:, -1]
    return float(h_left * dh_right - h_right * dh_left)


def _solve_shooting(x: np.ndarray, spacing: float, n_size: int, bracket: tuple[float, float]) -> SpectralSolution:
    low, high = bracket
    candidates = np.geomspace(low, high, BRACKET_SCAN_POINTS)
    values = [_mismatch(lam, n_size) for lam in candidates]
    root = None
    for k in range(len(candidates) - 1):
        if values[k] == 0.0:
            root = float(candidates[k])
            break
        if values[k] * values[k + 1] < 0:
            root = float(brentq(_mismatch, candidates[k], candidates[k + 1], args=(n_size,), xtol=1e-13, rtol=1e-12))
            break
    if root is None:
        raise SpectralError(f"no sign change of the shooting mismatch in lambda bracket [{low:g}, {high:g}]")

    left, right = _shoot(root, n_size, dense=True)
    a = SHOOTING_START
    h_mid_left = left.sol(0.5)[0]
    h_mid_right = right.sol(0.5)[0]
    if abs(h_mid_right) > 1e-300:
        match = h_mid_left / h_mid_right
    else:
        match = left.sol(0.5)[1] / right.sol(0.5)[1]

    h = np.empty_like(x)
    y = 1.0 - x
    series_left = x < a
    series_right = y < a
    on_left = (~series_left) & (x <= 0.5)
    on_right = (~series_right) & (x > 0.5)
    h[series_left] = x[series_left] + n_size * (1.0 - root) * x[series_left] ** 2
    h[series_right] = match * (y[series_right] - n_size * (1.0 + root) * y[series_right] ** 2)
    h[on_left] = left.sol(x[on_left])[0]
    h[on_right] = match * right.sol(x[on_right])[0]
    return _finish(x, h, 1.0, match, root, spacing, n_size, "shooting")


def spectral_qsd(
    grid_size: int,
    lambda_bracket: tuple[float, float] = (1e-3, 10.0),
    n_size: int = 1,
    method: SpectralMethod = "eigen",
) -> SpectralSolution:
    """Solve the one-dimensional QSD eigenproblem on n interior nodes."""
    if grid_size < MIN_GRID_SIZE:
        raise ValueError(f"grid_size must be >= {MIN_GRID_SIZE}, got {grid_size}")
    if n_size < 1:
        raise ValueError(f"n_size must be >= 1, got {n_size}")
    low, high = lambda_bracket
    if not 0 < low < high:
        raise ValueError(f"lambda bracket must satisfy 0 < low < high, got {lambda_bracket}")
    spacing = 1.0 / (grid_size + 1)
    x = spacing * np.arange(1, grid_size + 1)
    logger.info("Step: spectral_qsd start n=%s N=%s method=%s", grid_size, n_size, method)
    if method == "eigen":
        solution = _solve_eigen(x, spacing, n_size)
        if not low <= solution.eigenvalue <= high:
            logger.warning(
                "Eigenvalue %.6g lies outside the bracket [%g, %g]", solution.eigenvalue, low, high
            )
    elif method == "shooting":
        solution = _solve_shooting(x, spacing, n_size, (low, high))
    else:
        raise ValueError(f"Unsupported spectral method {method!r}. Use 'eigen' or 'shooting'.")
    logger.info(
        "Step: spectral_qsd done lambda=%.10g residual=%.3g exponents=%s",
        solution.eigenvalue,
        solution.residual,
        solution.endpoint_exponents,
    )
    return solution
