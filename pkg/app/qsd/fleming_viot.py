from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from time import perf_counter

import numpy as np

from app.config import settings
from app.flow.integrator import step_count
from app.models.measure import WeightedSamples
from app.models.simplex import SimplexPoint, barycenter, validate_simplex
from app.models.spec import ModelSpec
from app.qsd.estimate import QsdEstimate
from app.sde.rng import RESAMPLING_STREAM, NoiseStreams, auxiliary_generator
from app.sde.simulator import Scheme, check_scheme, euler_step
from app.utils.errors import QsdError, SimulationError

logger = logging.getLogger(__name__)


def default_start(model: ModelSpec, killing_margin: float = 0.0) -> np.ndarray:
    """Attractor hint when it is inside the killing boundary, else the barycenter."""
    if model.attractor_hint:
        hint = np.asarray(model.attractor_hint[0], dtype=float)
        if hint.min() > killing_margin:
            return hint
    return barycenter(model.d).as_array()


def fleming_viot(
    model: ModelSpec,
    particles: int,
    horizon: float,
    dt: float,
    burn_in: float | None = None,
    seed: int = 0,
    killing_margin: float = 0.0,
    scheme: Scheme = "euler_clamp",
    initial: SimplexPoint | Sequence[float] | np.ndarray | None = None,
) -> QsdEstimate:
    """Estimate the QSD with a Fleming–Viot particle system.

    All particles advance one dt together. A particle whose state reaches the
    killing boundary (min coordinate <= eps after the positivity fix) jumps to
    the position of a survivor chosen uniformly; jumps are resolved in
    particle-index order. The estimate averages post-burn-in snapshots of the
    ensemble and sets theta = events / (M * post-burn-in time).
    """
    if particles < 2:
        raise ValueError(f"Fleming-Viot needs at least 2 particles, got {particles}")
    check_scheme(scheme)
    if killing_margin < 0 or killing_margin >= 1.0 / model.d:
        raise ValueError(f"killing margin must lie in [0, 1/d), got {killing_margin}")
    burn_in = horizon / 2.0 if burn_in is None else burn_in
    if not 0 <= burn_in < horizon:
        raise ValueError(f"burn_in must lie in [0, horizon), got burn_in={burn_in} horizon={horizon}")

    if initial is None:
        start = default_start(model, killing_margin)
    else:
        start = validate_simplex(initial.coords if isinstance(initial, SimplexPoint) else initial).as_array()
    if start.min() <= max(killing_margin, model.absorption_threshold):
        raise ValueError("Fleming-Viot start must lie strictly inside the killing boundary")

    n_steps = step_count(horizon, dt)
    burn_step = min(int(math.ceil(burn_in / dt - 1e-9)), n_steps - 1)
    snapshot_count = min(settings.fv_max_snapshots, n_steps - burn_step)
    snapshot_steps = set(np.linspace(burn_step + 1, n_steps, snapshot_count).round().astype(int).tolist())
    threshold = max(killing_margin, model.absorption_threshold)

    started_at = perf_counter()
    logger.info(
        "Step: fleming_viot start model=%s N=%s particles=%s horizon=%s dt=%s eps=%s",
        model.name,
        model.n_size,
        particles,
        horizon,
        dt,
        killing_margin,
    )
    state = np.tile(start, (particles, 1))
    noise = NoiseStreams(seed, np.arange(particles), model.l)
    resampler = auxiliary_generator(seed, RESAMPLING_STREAM)
    events = 0
    snapshots: list[np.ndarray] = []
    for k in range(1, n_steps + 1):
        step = euler_step(model, state, noise.next(dt), dt, scheme, threshold)
        if not np.all(np.isfinite(step.states)):
            bad = int(np.flatnonzero(~np.isfinite(step.states).all(axis=1))[0])
            raise SimulationError(f"non-finite particle state while running {model.name}", step=k, stream=bad)
        state = step.states
        killed = np.flatnonzero(step.absorbed)
        if killed.size:
            survivors = np.flatnonzero(~step.absorbed)
            if survivors.size == 0:
                raise QsdError(
                    f"all {particles} particles were absorbed at step {k} (t={k * dt:g}); "
                    "resampling is impossible, reduce dt or increase the particle count"
                )
            donors = survivors[resampler.integers(survivors.size, size=killed.size)]
            state[killed] = state[donors]
            if k > burn_step:
                events += int(killed.size)
        if k in snapshot_steps:
            snapshots.append(state.copy())

    elapsed = (n_steps - burn_step) * dt
    theta = events / (particles * elapsed)
    theta_se = math.sqrt(events) / (particles * elapsed)
    if events == 0:
        logger.warning("No resampling events after burn-in for %s; theta estimate is 0", model.name)
    estimate = QsdEstimate(
        samples=WeightedSamples.uniform(np.concatenate(snapshots, axis=0)),
        theta=theta,
        theta_se=theta_se,
        method="fleming_viot",
        killing_margin=killing_margin,
        burn_in=burn_step * dt,
        particles=particles,
        n_size=model.n_size,
        model_name=model.name,
        events=events,
    )
    logger.info(
        "Step: fleming_viot done model=%s N=%s events=%s theta=%.6g se=%.3g elapsed=%.3fs",
        model.name,
        model.n_size,
        events,
        theta,
        theta_se,
        perf_counter() - started_at,
    )
    return estimate
