from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import trapezoid

from app.models.measure import WeightedSamples
from app.models.presets import builtin
from app.qsd.estimate import QsdEstimate
from app.qsd.fleming_viot import fleming_viot
from app.qsd.pruning import pruning_estimate
from app.qsd.spectral import spectral_qsd
from app.qsd.theta import theta_from_qsd
from app.sde.rng import INITIAL_DRAW_STREAM, auxiliary_generator
from app.stats.distances import measure_distance
from app.utils.errors import PreconditionError, QsdError


def test_fleming_viot_needs_two_particles() -> None:
    """Resampling needs at least one survivor besides the killed particle."""
    with pytest.raises(ValueError):
        fleming_viot(builtin("logistic1d"), particles=1, horizon=1.0, dt=0.01)


def test_fleming_viot_logistic_rate() -> None:
    """The particle survival rate on logistic1d lands near the principal eigenvalue."""
    estimate = fleming_viot(builtin("logistic1d"), particles=200, horizon=6.0, dt=0.005, seed=1)
    assert estimate.method == "fleming_viot"
    assert 0.6 < estimate.theta < 1.8
    assert estimate.events > 0
    assert estimate.points.min() > 0


def test_fleming_viot_is_reproducible() -> None:
    """Same seed, same estimate."""
    model = builtin("hawk_dove", n_size=4)
    first = fleming_viot(model, particles=50, horizon=2.0, dt=0.01, seed=3)
    second = fleming_viot(model, particles=50, horizon=2.0, dt=0.01, seed=3)
    assert first.theta == second.theta
    assert np.array_equal(first.points, second.points)


def test_fleming_viot_killing_margin_keeps_support_inside() -> None:
    """With eps > 0 every support point stays above the margin."""
    estimate = fleming_viot(builtin("hawk_dove", n_size=4), particles=50, horizon=2.0, dt=0.01, seed=2, killing_margin=0.1)
    assert estimate.points.min() > 0.1


def test_pruning_estimate() -> None:
    """Pruning keeps survivors and reports a nonnegative rate."""
    estimate = pruning_estimate(builtin("logistic1d"), [0.5, 0.5], t=1.0, dt=0.01, seed=4, trials=400)
    assert estimate.method == "pruning"
    assert estimate.theta >= 0
    assert estimate.points.min() > 0


def test_pruning_without_survivors_fails() -> None:
    """Nothing survives when every start is already absorbed."""
    with pytest.raises(QsdError):
        pruning_estimate(builtin("logistic1d"), [1.0, 0.0], t=1.0, dt=0.1, seed=0, trials=5)


def test_estimate_rejects_boundary_support() -> None:
    """Support points on the killing boundary are invalid."""
    with pytest.raises(QsdError):
        QsdEstimate(samples=WeightedSamples.uniform(np.array([[1.0, 0.0]])), theta=1.0, theta_se=0.1, method="pruning")


def test_spectral_density_is_normalized() -> None:
    """The eigen solver returns a probability density with a small residual."""
    solution = spectral_qsd(1000)
    assert trapezoid(solution.density, solution.grid) == pytest.approx(1.0)
    assert solution.density.min() >= 0
    assert solution.residual < 1e-6
    assert 0.9 < solution.eigenvalue < 1.3


def test_spectral_methods_agree() -> None:
    """Finite differences and shooting find the same principal eigenvalue."""
    eigen = spectral_qsd(2000, method="eigen")
    shooting = spectral_qsd(2000, method="shooting")
    assert eigen.eigenvalue == pytest.approx(shooting.eigenvalue, rel=2e-2)


def test_spectral_rejects_coarse_grid() -> None:
    """Grids under 100 interior nodes are refused."""
    with pytest.raises(ValueError):
        spectral_qsd(50)


def test_spectral_samples_lie_inside() -> None:
    """Inverse-CDF samples are interior simplex points."""
    solution = spectral_qsd(500)
    points = solution.sample(auxiliary_generator(0, INITIAL_DRAW_STREAM), 100)
    assert points.shape == (100, 2)
    assert np.allclose(points.sum(axis=1), 1.0)
    assert points.min() > 0


def test_theta_from_spectral_start() -> None:
    """Absorption times started from the spectral QSD give a rate near its eigenvalue."""
    solution = spectral_qsd(1000)
    start = solution.to_estimate(auxiliary_generator(5, INITIAL_DRAW_STREAM), 500)
    fit = theta_from_qsd(builtin("logistic1d"), start, dt=0.005, seed=5, samples=500, horizon=12.0)
    assert fit.theta == pytest.approx(solution.eigenvalue, rel=0.3)
    assert fit.ci_low <= fit.theta <= fit.ci_high
    assert fit.samples == 500


def test_fleming_viot_matches_spectral_density() -> None:
    """On logistic1d the particle QSD and the spectral density are W1-close."""
    estimate = fleming_viot(builtin("logistic1d"), particles=500, horizon=10.0, dt=0.005, seed=7)
    solution = spectral_qsd(1000)
    assert measure_distance(estimate.samples, solution.as_measure()) < 0.08
    assert estimate.theta == pytest.approx(solution.eigenvalue, rel=0.25)


def test_pruning_agrees_with_fleming_viot() -> None:
    """Conditioning on survival and particle resampling target the same law."""
    model = builtin("logistic1d")
    pruned = pruning_estimate(model, [0.5, 0.5], t=3.0, dt=0.005, seed=8, trials=10000)
    particles = fleming_viot(model, particles=500, horizon=10.0, dt=0.005, seed=8)
    assert len(pruned.samples) > 100
    assert measure_distance(pruned.samples, particles.samples) < 0.08


def test_theta_refuses_support_on_the_absorbing_set() -> None:
    """Absorption times are undefined from points already on the boundary."""
    with pytest.raises(QsdError):
        QsdEstimate(samples=WeightedSamples.uniform(np.array([[0.0, 1.0]])), theta=1.0, theta_se=0.1, method="spectral")
    estimate = QsdEstimate(
        samples=WeightedSamples.uniform(np.array([[0.05, 0.95], [0.5, 0.5]])), theta=1.0, theta_se=0.1, method="spectral"
    )
    model = replace(builtin("logistic1d"), absorption_threshold=0.1)
    with pytest.raises(PreconditionError):
        theta_from_qsd(model, estimate, dt=0.01, seed=0, samples=10)
