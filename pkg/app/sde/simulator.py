from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import partial
from time import perf_counter
from typing import Literal

import numpy as np

from app.config import settings
from app.flow.integrator import step_count
from app.models.measure import WeightedSamples
from app.models.simplex import SimplexPoint, renormalize, validate_simplex
from app.models.spec import ModelSpec
from app.sde.rng import INITIAL_DRAW_STREAM, NoiseStreams, auxiliary_generator
from app.utils.errors import SimplexError, SimulationError
from app.utils.pool import map_blocks

logger = logging.getLogger(__name__)

Scheme = Literal["euler_clamp", "euler_reflect"]
SCHEMES: tuple[str, ...] = ("euler_clamp", "euler_reflect")

Initial = SimplexPoint | Sequence[float] | np.ndarray | WeightedSamples

_DEVIATION_CHUNK = 1024


def check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"Unsupported scheme {scheme!r}. Use one of: {', '.join(SCHEMES)}.")


@dataclass(frozen=True)
class StepResult:
    states: np.ndarray
    absorbed: np.ndarray
    faces: np.ndarray


def euler_step(
    model: ModelSpec,
    x: np.ndarray,
    increments: np.ndarray,
    dt: float,
    scheme: Scheme = "euler_clamp",
    threshold: float = 0.0,
) -> StepResult:
    """One positivity-preserving Euler–Maruyama step for a (n, d) batch.

    euler_clamp sets negative coordinates to 0 and euler_reflect takes
    absolute values; both renormalize. A row is absorbed when a coordinate
    of the fixed state is at or below `threshold`. Reflected coordinates
    never reach 0 exactly, so euler_reflect absorbs inside a boundary layer
    of `settings.reflect_layer * dt` and projects absorbed rows onto the face.
    """
    noise = (model.diffusion_matrix(x) * increments[:, None, :]).sum(axis=-1) * model.noise_scale
    raw = x + model.drift_field(x) * dt + noise
    if scheme == "euler_clamp":
        states = renormalize(np.maximum(raw, 0.0))
        faces = states <= threshold
        return StepResult(states=states, absorbed=faces.any(axis=1), faces=faces)

    states = renormalize(np.abs(raw))
    faces = states <= max(threshold, settings.reflect_layer * dt)
    faces[np.arange(states.shape[0]), states.argmax(axis=1)] = False
    absorbed = faces.any(axis=1)
    if absorbed.any():
        projected = renormalize(np.where(faces[absorbed], 0.0, states[absorbed]))
        states[absorbed] = projected
    return StepResult(states=states, absorbed=absorbed, faces=faces)


@dataclass(frozen=True)
class EnsembleResult:
    taus: np.ndarray
    absorbed: np.ndarray
    faces: np.ndarray
    finals: np.ndarray
    deviations: np.ndarray | None = None
    paths: np.ndarray | None = None


@dataclass(frozen=True)
class _BlockJob:
    starts: np.ndarray
    streams: np.ndarray


def _frozen_deviation(states: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Max distance of fixed states to the remaining reference rows."""
    out = np.zeros(states.shape[0])
    for begin in range(0, reference.shape[0], _DEVIATION_CHUNK):
        tail = reference[begin : begin + _DEVIATION_CHUNK]
        gaps = np.linalg.norm(states[:, None, :] - tail[None, :, :], axis=-1)
        np.maximum(out, gaps.max(axis=1), out=out)
    return out


def _run_block(
    job: _BlockJob,
    model: ModelSpec,
    n_steps: int,
    dt: float,
    scheme: Scheme,
    seed: int,
    threshold: float,
    reference: np.ndarray | None,
    keep_paths: bool,
) -> EnsembleResult:
    n, d = job.starts.shape
    state = job.starts.copy()
    faces = state <= threshold
    absorbed = faces.any(axis=1)
    taus = np.where(absorbed, 0.0, np.inf)
    deviation = None if reference is None else np.linalg.norm(state - reference[0], axis=1)
    paths = None
    if keep_paths:
        paths = np.empty((n, n_steps + 1, d))
        paths[:, 0] = state

    noise = NoiseStreams(seed, job.streams, model.l)
    for k in range(1, n_steps + 1):
        if absorbed.all():
            if deviation is not None:
                np.maximum(deviation, _frozen_deviation(state, reference[k:]), out=deviation)
            if paths is not None:
                paths[:, k:] = state[:, None, :]
            break
        increments = noise.next(dt)
        alive = np.flatnonzero(~absorbed)
        step = euler_step(model, state[alive], increments[alive], dt, scheme, threshold)
        finite = np.isfinite(step.states).all(axis=1)
        if not finite.all():
            bad = int(job.streams[alive[np.flatnonzero(~finite)[0]]])
            raise SimulationError(f"non-finite state while simulating {model.name}", step=k, stream=bad)
        state[alive] = step.states
        hit = alive[step.absorbed]
        absorbed[hit] = True
        taus[hit] = k * dt
        faces[hit] = step.faces[step.absorbed]
        if deviation is not None:
            np.maximum(deviation, np.linalg.norm(state - reference[k], axis=1), out=deviation)
        if paths is not None:
            paths[:, k] = state
    return EnsembleResult(taus=taus, absorbed=absorbed, faces=faces, finals=state, deviations=deviation, paths=paths)


def prepare_starts(initial: Initial, count: int | None, seed: int) -> np.ndarray:
    """Expand a point, a (n, d) array, or a weighted sample set into per-path starts."""
    if isinstance(initial, WeightedSamples):
        if count is None:
            raise ValueError("count is required when drawing starts from a sample set")
        return initial.draw(auxiliary_generator(seed, INITIAL_DRAW_STREAM), count)
    array = np.asarray(initial.as_array() if isinstance(initial, SimplexPoint) else initial, dtype=float)
    if array.ndim == 1:
        point = validate_simplex(array).as_array()
        return np.tile(point, (1 if count is None else count, 1))
    if array.ndim != 2 or array.shape[0] == 0:
        raise SimplexError(f"initial states must be a point or a nonempty (n, d) array, got shape {array.shape}")
    if count is not None and array.shape[0] != count:
        raise ValueError(f"got {array.shape[0]} initial states for count={count}")
    if not np.all(np.isfinite(array)) or array.min() < -1e-9 or np.abs(array.sum(axis=1) - 1.0).max() > 1e-9:
        raise SimplexError("initial states must lie on the simplex")
    return renormalize(np.maximum(array, 0.0))


def run_ensemble(
    model: ModelSpec,
    starts: np.ndarray,
    horizon: float,
    dt: float,
    scheme: Scheme,
    seed: int,
    threshold: float | None = None,
    reference: np.ndarray | None = None,
    keep_paths: bool = False,
    workers: int | None = None,
) -> EnsembleResult:
    """Simulate one path per row of `starts`; path k uses RNG stream k.

    Paths are cut into fixed blocks of settings.block_size, so the result is
    the same for every worker count.
    """
    check_scheme(scheme)
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    if starts.shape[1] != model.d:
        raise SimplexError(f"initial states have dimension {starts.shape[1]}, model has d={model.d}")
    n_steps = step_count(horizon, dt)
    if reference is not None and reference.shape[0] != n_steps + 1:
        raise ValueError("reference trajectory must have one row per time step")
    level = model.absorption_threshold if threshold is None else max(threshold, model.absorption_threshold)
    size = settings.block_size
    streams = np.arange(starts.shape[0], dtype=np.int64)
    blocks = [_BlockJob(starts[i : i + size], streams[i : i + size]) for i in range(0, starts.shape[0], size)]
    runner = partial(
        _run_block,
        model=model,
        n_steps=n_steps,
        dt=dt,
        scheme=scheme,
        seed=seed,
        threshold=level,
        reference=reference,
        keep_paths=keep_paths,
    )
    results = map_blocks(runner, blocks, workers or settings.workers)
    return EnsembleResult(
        taus=np.concatenate([r.taus for r in results]),
        absorbed=np.concatenate([r.absorbed for r in results]),
        faces=np.concatenate([r.faces for r in results]),
        finals=np.concatenate([r.finals for r in results]),
        deviations=None if reference is None else np.concatenate([r.deviations for r in results]),
        paths=np.concatenate([r.paths for r in results]) if keep_paths else None,
    )


@dataclass(frozen=True)
class SdePath:
    """One simulated path, stopped at absorption or at the horizon."""

    times: np.ndarray
    states: np.ndarray
    absorbed: bool
    tau: float | None
    face: tuple[int, ...]
    stream: int

    def header(self) -> list[str]:
        return ["t"] + [f"x{i + 1}" for i in range(self.states.shape[1])] + ["absorbed"]

    def rows(self) -> list[list[float]]:
        last = len(self.times) - 1
        return [
            [float(t), *map(float, state), 1 if self.absorbed and k == last else 0]
            for k, (t, state) in enumerate(zip(self.times, self.states))
        ]


@dataclass(frozen=True)
class TrajectoryBatch:
    """Ensemble of independent paths; row k was driven by RNG stream k."""

    model_name: str
    scheme: Scheme
    dt: float
    horizon: float
    seed: int
    taus: np.ndarray
    absorbed: np.ndarray
    faces: np.ndarray
    finals: np.ndarray
    deviations: np.ndarray | None = None

    @property
    def count(self) -> int:
        return int(self.taus.shape[0])

    @property
    def absorbed_fraction(self) -> float:
        return float(self.absorbed.mean())

    @property
    def observed_times(self) -> np.ndarray:
        """Absorption time, or the horizon for censored paths."""
        return np.where(self.absorbed, self.taus, self.horizon)

    @property
    def absorbed_taus(self) -> np.ndarray:
        return self.taus[self.absorbed]

    @property
    def survivors(self) -> np.ndarray:
        """States at the horizon of the paths that were not absorbed."""
        return self.finals[~self.absorbed]

    def mean_tau(self) -> float:
        taus = self.absorbed_taus
        return float(taus.mean()) if taus.size else float("nan")

    def tau_standard_error(self) -> float:
        taus = self.absorbed_taus
        return float(taus.std(ddof=1) / np.sqrt(taus.size)) if taus.size > 1 else float("nan")

    def tau_quantiles(self, levels: Sequence[float] = (0.1, 0.5, 0.9)) -> dict[float, float]:
        taus = self.absorbed_taus
        if not taus.size:
            return {q: float("nan") for q in levels}
        return {q: float(v) for q, v in zip(levels, np.quantile(taus, levels))}

    def face_of(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.faces[index]))

    def summary(self) -> dict[str, float | int]:
        out: dict[str, float | int] = {
            "count": self.count,
            "absorbed_fraction": self.absorbed_fraction,
            "mean_tau": self.mean_tau(),
            "tau_se": self.tau_standard_error(),
        }
        for q, value in self.tau_quantiles().items():
            out[f"tau_q{int(round(q * 100)):02d}"] = value
        return out

    def header(self) -> list[str]:
        return ["stream", "tau", "absorbed", "DN"]

    def rows(self) -> list[list[float]]:
        deviations = self.deviations if self.deviations is not None else np.full(self.count, np.nan)
        observed = self.observed_times
        return [
            [k, float(observed[k]), int(self.absorbed[k]), float(deviations[k])]
            for k in range(self.count)
        ]


def simulate_batch(
    model: ModelSpec,
    initial: Initial,
    horizon: float,
    dt: float,
    scheme: Scheme = "euler_clamp",
    seed: int = 0,
    count: int | None = None,
    killing_margin: float = 0.0,
    workers: int | None = None,
) -> TrajectoryBatch:
    """Simulate `count` independent paths from a point or from per-path starts.

    With `killing_margin` > 0 a path is stopped once min_i x_i <= margin,
    which realizes the process killed on leaving the shrunken simplex.
    """
    if count is not None and count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if killing_margin < 0:
        raise ValueError("killing margin must be >= 0")
    started_at = perf_counter()
    starts = prepare_starts(initial, count, seed)
    logger.info(
        "Step: simulate_batch start model=%s count=%s horizon=%s dt=%s scheme=%s",
        model.name,
        starts.shape[0],
        horizon,
        dt,
        scheme,
    )
    result = run_ensemble(model, starts, horizon, dt, scheme, seed, threshold=killing_margin, workers=workers)
    batch = TrajectoryBatch(
        model_name=model.name,
        scheme=scheme,
        dt=dt,
        horizon=horizon,
        seed=seed,
        taus=result.taus,
        absorbed=result.absorbed,
        faces=result.faces,
        finals=result.finals,
    )
    logger.info(
        "Step: simulate_batch done model=%s absorbed_fraction=%.6g mean_tau=%.6g elapsed=%.3fs",
        model.name,
        batch.absorbed_fraction,
        batch.mean_tau(),
        perf_counter() - started_at,
    )
    return batch


def simulate_path(
    model: ModelSpec,
    x0: SimplexPoint | Sequence[float] | np.ndarray,
    horizon: float,
    dt: float,
    scheme: Scheme = "euler_clamp",
    seed: int = 0,
    stream: int = 0,
) -> SdePath:
    """Simulate one path driven by RNG stream `stream` and record every state."""
    check_scheme(scheme)
    start = validate_simplex(x0.coords if isinstance(x0, SimplexPoint) else x0).as_array()
    n_steps = step_count(horizon, dt)
    job = _BlockJob(start[None, :], np.array([stream], dtype=np.int64))
    result = _run_block(job, model, n_steps, dt, scheme, seed, model.absorption_threshold, None, True)
    assert result.paths is not None
    absorbed = bool(result.absorbed[0])
    if absorbed:
        last = int(round(result.taus[0] / dt))
        tau: float | None = float(result.taus[0])
    else:
        last = n_steps
        tau = None
    return SdePath(
        times=dt * np.arange(last + 1),
        states=result.paths[0, : last + 1],
        absorbed=absorbed,
        tau=tau,
        face=tuple(int(i) for i in np.flatnonzero(result.faces[0])),
        stream=stream,
    )
