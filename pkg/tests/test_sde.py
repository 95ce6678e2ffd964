from __future__ import annotations

import numpy as np
import pytest

from app.config import settings
from app.flow.integrator import integrate_flow
from app.models.presets import HAWK_DOVE_PAYOFF, builtin, replicator_drift
from app.models.spec import ModelSpec
from app.sde.rng import NoiseStreams, auxiliary_generator, stream_generator
from app.sde.simulator import euler_step, simulate_batch, simulate_path
from app.utils.errors import SimplexError


def _silent_hawk_dove() -> ModelSpec:
    def sigma(x: np.ndarray) -> np.ndarray:
        return np.zeros((x.shape[0], 2, 1))

    return ModelSpec(d=2, l=1, drift=replicator_drift(HAWK_DOVE_PAYOFF), sigma=sigma, name="silent")


def test_streams_do_not_depend_on_neighbours() -> None:
    """Stream k draws the same numbers alone or next to other streams."""
    alone = NoiseStreams(7, [3], 2, chunk_steps=4)
    grouped = NoiseStreams(7, [0, 1, 2, 3], 2, chunk_steps=4)
    for _ in range(9):
        assert np.array_equal(alone.next(0.01)[0], grouped.next(0.01)[3])


def test_auxiliary_streams_are_reserved() -> None:
    """Path stream ids cannot be used as auxiliary streams."""
    with pytest.raises(ValueError):
        auxiliary_generator(0, 5)
    with pytest.raises(ValueError):
        stream_generator(-1, 0)


def test_zero_noise_path_equals_euler_flow() -> None:
    """With σ ≡ 0 the simulated path is bitwise the Euler flow."""
    model = _silent_hawk_dove()
    path = simulate_path(model, [0.3, 0.7], horizon=2.0, dt=0.01, seed=4)
    flow = integrate_flow(model, [0.3, 0.7], horizon=2.0, dt=0.01, method="euler")
    assert not path.absorbed
    assert np.array_equal(path.states, flow.states)


def test_vertex_start_is_absorbed_at_time_zero() -> None:
    """A path started on the boundary is absorbed immediately."""
    batch = simulate_batch(builtin("logistic1d"), [1.0, 0.0], horizon=1.0, dt=0.01, seed=0, count=3)
    assert batch.absorbed.all()
    assert np.all(batch.taus == 0.0)
    assert batch.face_of(0) == (1,)


def test_logistic_paths_are_absorbed() -> None:
    """Square-root noise absorbs almost every path in finite time."""
    batch = simulate_batch(builtin("logistic1d"), [0.5, 0.5], horizon=50.0, dt=0.01, seed=11, count=200)
    assert batch.absorbed_fraction >= 0.99
    assert np.all(batch.absorbed_taus > 0)
    assert np.allclose(batch.finals.sum(axis=1), 1.0)


def test_linear_noise_keeps_paths_inside() -> None:
    """The Lipschitz comparison noise leaves the hawk_dove paths in the open simplex."""
    model = builtin("hawk_dove", n_size=100, noise_form="linear")
    batch = simulate_batch(model, [0.5, 0.5], horizon=2.0, dt=0.01, seed=2, count=50)
    assert not batch.absorbed.any()
    assert batch.survivors.min() > 0


def test_results_do_not_depend_on_worker_count() -> None:
    """Fixed blocks and per-path streams make any worker count give identical bytes."""
    original_block = settings.block_size
    object.__setattr__(settings, "block_size", 8)
    try:
        model = builtin("logistic1d", n_size=5)
        one = simulate_batch(model, [0.5, 0.5], horizon=2.0, dt=0.01, seed=9, count=30, workers=1)
        three = simulate_batch(model, [0.5, 0.5], horizon=2.0, dt=0.01, seed=9, count=30, workers=3)
        assert np.array_equal(one.taus, three.taus)
        assert np.array_equal(one.finals, three.finals)
    finally:
        object.__setattr__(settings, "block_size", original_block)


def test_single_path_matches_batch_row() -> None:
    """Path k of a batch follows the same trajectory as stream k simulated alone."""
    model = builtin("logistic1d", n_size=5)
    batch = simulate_batch(model, [0.5, 0.5], horizon=1.0, dt=0.01, seed=3, count=4)
    path = simulate_path(model, [0.5, 0.5], horizon=1.0, dt=0.01, seed=3, stream=2)
    assert np.allclose(path.states[-1], batch.finals[2], atol=1e-12)
    assert path.absorbed == bool(batch.absorbed[2])


def _raw_update(model: ModelSpec, x: np.ndarray, increments: np.ndarray, dt: float) -> np.ndarray:
    noise = (model.diffusion_matrix(x) * increments[:, None, :]).sum(axis=-1) * model.noise_scale
    return x + model.drift_field(x) * dt + noise


def test_clamp_absorbs_crossing_and_reflect_continues() -> None:
    """A raw update below zero is absorbed by euler_clamp and bounced by euler_reflect."""
    model = builtin("logistic1d")
    x = np.array([[0.01, 0.99]])
    kicks = [np.array([[10.0]]), np.array([[-10.0]])]
    kick = next(k for k in kicks if _raw_update(model, x, k, 0.01)[0, 0] < 0.0)
    raw = _raw_update(model, x, kick, 0.01)

    clamp = euler_step(model, x, kick, 0.01, "euler_clamp")
    assert clamp.absorbed[0]
    assert clamp.states[0, 0] == 0.0
    assert clamp.faces[0].tolist() == [True, False]

    reflect = euler_step(model, x, kick, 0.01, "euler_reflect")
    assert not reflect.absorbed[0]
    assert np.allclose(reflect.states, np.abs(raw) / np.abs(raw).sum())
    assert reflect.states.min() > 0.01


def test_reflect_absorbs_inside_boundary_layer() -> None:
    """euler_reflect absorbs a coordinate that ends within dt of the face and projects onto it."""
    model = builtin("logistic1d")
    x = np.array([[0.005, 0.995]])
    still = np.zeros((1, 1))
    clamp = euler_step(model, x, still, 0.01, "euler_clamp")
    reflect = euler_step(model, x, still, 0.01, "euler_reflect")
    assert not clamp.absorbed[0]
    assert reflect.absorbed[0]
    assert reflect.states[0].tolist() == [0.0, 1.0]
    assert reflect.faces[0].tolist() == [True, False]


def test_clamp_and_reflect_agree_on_mean_absorption_time() -> None:
    """The schemes differ path by path but give the same mean τ within Monte Carlo error."""
    model = builtin("logistic1d")
    runs = {
        scheme: simulate_batch(model, [0.5, 0.5], horizon=50.0, dt=0.01, scheme=scheme, seed=21, count=400)
        for scheme in ("euler_clamp", "euler_reflect")
    }
    clamp, reflect = runs["euler_clamp"], runs["euler_reflect"]
    assert not np.array_equal(clamp.taus, reflect.taus)
    assert not np.array_equal(clamp.finals, reflect.finals)
    assert reflect.absorbed_fraction >= 0.99
    gap = abs(clamp.mean_tau() - reflect.mean_tau())
    assert gap <= 4.0 * np.hypot(clamp.tau_standard_error(), reflect.tau_standard_error())


def test_killing_margin_stops_paths_early() -> None:
    """Paths stop once a coordinate reaches the killing margin."""
    model = builtin("logistic1d")
    plain = simulate_batch(model, [0.5, 0.5], horizon=20.0, dt=0.01, seed=5, count=50)
    killed = simulate_batch(model, [0.5, 0.5], horizon=20.0, dt=0.01, seed=5, count=50, killing_margin=0.1)
    assert np.all(killed.observed_times <= plain.observed_times)


def test_bad_starts_are_rejected() -> None:
    """Starts off the simplex or of the wrong dimension raise SimplexError."""
    with pytest.raises(SimplexError):
        simulate_batch(builtin("logistic1d"), [0.5, 0.6], horizon=1.0, dt=0.1, seed=0, count=2)
    with pytest.raises(SimplexError):
        simulate_batch(builtin("logistic1d"), [0.2, 0.3, 0.5], horizon=1.0, dt=0.1, seed=0, count=2)
