from __future__ import annotations

import numpy as np
import pytest

from app.flow.attractor import probe_attractor
from app.flow.integrator import flow_step, flow_time_average, integrate_flow, step_count
from app.models.presets import PRESET_NAMES, builtin, replicator_drift
from app.models.spec import ModelSpec
from app.utils.errors import AttractorError, FlowError, PreconditionError


def test_logistic_flow_matches_closed_form() -> None:
    """RK4 reproduces x(t) = x0 e^t / (1 - x0 + x0 e^t)."""
    trajectory = integrate_flow(builtin("logistic1d"), [0.2, 0.8], horizon=3.0, dt=0.01)
    exact = 0.2 * np.exp(trajectory.times) / (0.8 + 0.2 * np.exp(trajectory.times))
    assert np.abs(trajectory.states[:, 0] - exact).max() < 1e-7
    assert np.allclose(trajectory.states.sum(axis=1), 1.0)
    assert trajectory.header() == ["t", "x1", "x2"]


def test_step_count_rejects_bad_steps() -> None:
    """dt must be positive and no larger than the horizon."""
    assert step_count(1.0, 0.1) == 10
    with pytest.raises(ValueError):
        step_count(1.0, 0.0)
    with pytest.raises(ValueError):
        step_count(0.01, 0.1)


def test_time_average_of_attracting_flow_concentrates() -> None:
    """The time average of hawk_dove after burn-in sits at the interior fixed point."""
    average = flow_time_average(builtin("hawk_dove"), [0.5, 0.5], horizon=60.0, dt=0.05, burn_in=40.0)
    assert np.allclose(average.mean(), [2.0 / 3.0, 1.0 / 3.0], atol=1e-4)


def test_probe_certifies_hawk_dove_attractor() -> None:
    """Convergence times are positive and grow as eps shrinks."""
    probe = probe_attractor(builtin("hawk_dove"), [[2.0 / 3.0, 1.0 / 3.0]], 0.1, [0.05, 0.01], 30)
    assert probe.starts > 1
    assert 0 < probe.time_for(0.05) <= probe.time_for(0.01)
    assert probe.separation == pytest.approx(0.1)


def test_probe_refuses_boundary_candidate() -> None:
    """A vertex is not an interior attractor."""
    with pytest.raises(PreconditionError):
        probe_attractor(builtin("logistic1d"), [[1.0, 0.0]], 0.1, [0.05], 20)


def test_probe_rejects_neutral_center() -> None:
    """The rock-paper-scissors center attracts nothing: orbits keep circling."""
    with pytest.raises(AttractorError, match="not an attractor"):
        probe_attractor(builtin("rps"), [[1 / 3, 1 / 3, 1 / 3]], 0.1, [0.01], 20, horizon=50.0, dt=0.05)


def _logistic_error(dt: float) -> float:
    trajectory = integrate_flow(builtin("logistic1d"), [0.2, 0.8], horizon=2.0, dt=dt)
    exact = 0.2 * np.exp(trajectory.times) / (0.8 + 0.2 * np.exp(trajectory.times))
    return float(np.abs(trajectory.states[:, 0] - exact).max())


def test_rk4_error_is_fourth_order() -> None:
    """Halving dt divides the RK4 error by about 16."""
    ratio = _logistic_error(0.2) / _logistic_error(0.1)
    assert 12.0 < ratio < 20.0


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_vertices_are_fixed_points(name: str) -> None:
    """Every vertex of the simplex stays put under the flow."""
    model = builtin(name)
    for index in range(model.d):
        vertex = np.eye(model.d)[index]
        trajectory = integrate_flow(model, vertex, horizon=5.0, dt=0.05)
        assert np.abs(trajectory.states - vertex).max() <= 1e-12


def test_rps_time_average_is_the_center() -> None:
    """Orbits of the neutral rock-paper-scissors flow average to the barycenter."""
    average = flow_time_average(builtin("rps"), [0.5, 0.3, 0.2], horizon=300.0, dt=0.01, burn_in=0.0)
    assert np.allclose(average.mean(), [1.0 / 3.0] * 3, atol=0.03)


def test_overshooting_step_raises() -> None:
    """A step that leaves the simplex is reported instead of clamped away."""

    def sigma(x: np.ndarray) -> np.ndarray:
        return np.zeros((x.shape[0], 2, 1))

    model = ModelSpec(d=2, l=1, drift=replicator_drift(np.array([[0.0, 0.0], [10.0, 0.0]])), sigma=sigma, name="steep")
    with pytest.raises(FlowError, match="left the simplex"):
        flow_step(model, np.array([[0.5, 0.5]]), 1.0, "euler")
    assert np.all(flow_step(model, np.array([[0.5, 0.5]]), 0.01, "euler") > 0)
