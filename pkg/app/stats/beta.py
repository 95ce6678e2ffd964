from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from app.flow.integrator import flow_step, step_count
from app.models.simplex import barycentric_grid
from app.models.spec import ModelSpec
from app.qsd.estimate import QsdEstimate
from app.sde.simulator import Scheme, run_ensemble
from app.stats.intervals import proportion_standard_error, wilson_interval
from app.stats.verdicts import Verdict, upper_bound_verdict

logger = logging.getLogger(__name__)

BETA_HORIZON = 1.0
RELATION_SIGMAS = 3.0


@dataclass(frozen=True)
class BetaReport:
    """Grid-sup estimate of the worst-case escape probability from the flow's δ-tube at time 1.

    `points` is the lattice of K = {min_i x_i >= k_margin}; `collar_points`
    the lattice of U_K = {0 < min_i x_i < k_margin}.
    """

    delta: float
    k_margin: float
    n_size: int
    grid_resolution: int
    trials: int
    points: np.ndarray
    probabilities: np.ndarray
    standard_errors: np.ndarray
    beta: float
    beta_se: float
    beta_ci: tuple[float, float]
    collar_points: np.ndarray
    collar_probabilities: np.ndarray
    collar_inf: float
    bound: float
    verdicts: tuple[Verdict, ...]

    def header(self) -> list[str]:
        d = self.points.shape[1]
        return ["set"] + [f"x{i + 1}" for i in range(d)] + ["probability", "se"]

    def csv_rows(self) -> list[list[float | str]]:
        rows: list[list[float | str]] = [
            ["K", *map(float, x), float(p), float(se)]
            for x, p, se in zip(self.points, self.probabilities, self.standard_errors)
        ]
        for x, p in zip(self.collar_points, self.collar_probabilities):
            rows.append(["U_K", *map(float, x), float(p), proportion_standard_error(round(p * self.trials), self.trials)])
        return rows


def flow_image(model: ModelSpec, points: np.ndarray, horizon: float, dt: float) -> np.ndarray:
    """φ_horizon for a batch of starts, RK4 on the simulation grid."""
    state = points.copy()
    for _ in range(step_count(horizon, dt)):
        state = flow_step(model, state, dt)
    return state


def collar_lattice(d: int, resolution: int, margin: float) -> np.ndarray:
    points = barycentric_grid(d, resolution)
    low = points.min(axis=1)
    return points[(low > 0.0) & (low < margin - 1e-12)]


def _mass_in_collar(qsd: QsdEstimate, margin: float) -> tuple[float, int]:
    inside = qsd.points.min(axis=1) < margin
    count = qsd.particles if qsd.particles > 0 else len(qsd.samples)
    return float(qsd.samples.weights[inside].sum()), count


def beta_study(
    model: ModelSpec,
    k_margin: float,
    delta: float,
    grid_resolution: int,
    dt: float,
    seed: int,
    trials: int,
    scheme: Scheme = "euler_clamp",
    qsd: QsdEstimate | None = None,
    workers: int | None = None,
) -> BetaReport:
    """Monte Carlo estimate of β_{δ,K}(N) = sup_{x∈K} P_x[|X_1 - φ_1(x)| >= δ] over a lattice of K.

    Every K and collar point gets `trials` paths from one ensemble. The
    collar infimum of P_x[absorbed by time 1] turns β into the bound
    μ^N(U_K) <= β / inf. Given a QSD estimate, the QSD mass of U_K is
    checked against that bound and 1 - β is compared with e^{-θ}.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    points = barycentric_grid(model.d, grid_resolution, k_margin)
    if points.shape[0] == 0:
        raise ValueError(f"K = {{min x >= {k_margin}}} has no point at grid resolution {grid_resolution}")
    collar = collar_lattice(model.d, grid_resolution, k_margin)

    starts = np.repeat(np.concatenate([points, collar], axis=0), trials, axis=0)
    result = run_ensemble(model, starts, BETA_HORIZON, dt, scheme, seed, workers=workers)
    k_count = points.shape[0] * trials

    target = np.repeat(flow_image(model, points, BETA_HORIZON, dt), trials, axis=0)
    outside = np.linalg.norm(result.finals[:k_count] - target, axis=1) >= delta
    hits = outside.reshape(points.shape[0], trials).sum(axis=1)
    probabilities = hits / trials
    errors = np.array([proportion_standard_error(int(h), trials) for h in hits])
    worst = int(np.argmax(probabilities))
    beta = float(probabilities[worst])
    beta_ci = wilson_interval(int(hits[worst]), trials)

    collar_probs = result.absorbed[k_count:].reshape(collar.shape[0], trials).mean(axis=1)
    collar_inf = float(collar_probs.min()) if collar.shape[0] else 0.0
    bound = beta / collar_inf if collar_inf > 0 else math.inf
    if not math.isfinite(bound):
        logger.warning("No absorption observed from the collar of K=%s; the U_K bound is unavailable", k_margin)

    verdicts: list[Verdict] = []
    if qsd is not None:
        mass, count = _mass_in_collar(qsd, k_margin)
        hits_mass = int(round(mass * count))
        verdicts.append(
            upper_bound_verdict(
                "beta_collar_bound",
                mass,
                bound,
                wilson_interval(hits_mass, count),
                note="QSD mass of U_K against beta / inf P[absorbed]",
            )
        )
        survival = math.exp(-qsd.theta)
        sigma = math.hypot(float(errors[worst]), survival * qsd.theta_se)
        gap = (1.0 - beta) - survival
        verdicts.append(
            Verdict(
                "beta_theta_relation",
                "PASS" if gap <= RELATION_SIGMAS * sigma else "FAIL",
                1.0 - beta,
                survival,
                (1.0 - beta_ci[1], 1.0 - beta_ci[0]),
                note="1 - beta <= exp(-theta)",
            )
        )
    logger.info(
        "Beta study model=%s N=%s delta=%s K_points=%s beta=%.6g collar_inf=%.6g bound=%.6g",
        model.name,
        model.n_size,
        delta,
        points.shape[0],
        beta,
        collar_inf,
        bound,
    )
    return BetaReport(
        delta=delta,
        k_margin=k_margin,
        n_size=model.n_size,
        grid_resolution=grid_resolution,
        trials=trials,
        points=points,
        probabilities=probabilities,
        standard_errors=errors,
        beta=beta,
        beta_se=float(errors[worst]),
        beta_ci=beta_ci,
        collar_points=collar,
        collar_probabilities=collar_probs,
        collar_inf=collar_inf,
        bound=bound,
        verdicts=tuple(verdicts),
    )


def beta_trend(reports: list[BetaReport]) -> list[Verdict]:
    """β̂ must not grow with N beyond the combined standard errors."""
    verdicts = []
    for prev, nxt in zip(reports, reports[1:]):
        tolerance = RELATION_SIGMAS * math.hypot(prev.beta_se, nxt.beta_se)
        ok = nxt.beta < prev.beta or nxt.beta == 0.0 or nxt.beta - prev.beta <= tolerance
        verdicts.append(
            Verdict(
                f"beta_trend N={prev.n_size}->{nxt.n_size}",
                "PASS" if ok else "FAIL",
                nxt.beta,
                prev.beta,
                nxt.beta_ci,
            )
        )
    return verdicts
