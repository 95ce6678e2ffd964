from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from app.models.measure import WeightedSamples
from app.models.presets import builtin, rate_table_model
from app.models.rates import from_rates
from app.models.simplex import barycentric_grid, lattice_compositions, validate_simplex
from app.models.spec import RateSpec
from app.utils.errors import ModelError, SimplexError


def test_validate_simplex_projects_small_negatives() -> None:
    """Tiny negative coordinates are clamped and the point renormalized."""
    point = validate_simplex([1.0 + 5e-10, -5e-10])
    assert point.coords == (1.0, 0.0)


def test_validate_simplex_is_idempotent() -> None:
    """Validating a validated point returns the same coordinates bit for bit."""
    first = validate_simplex([0.2, 0.3, 0.5])
    assert validate_simplex(first.coords).coords == first.coords


def test_validate_simplex_rejects_bad_points() -> None:
    """Sums away from 1, negatives and non-finite values are errors."""
    with pytest.raises(SimplexError):
        validate_simplex([0.5, 0.6])
    with pytest.raises(SimplexError):
        validate_simplex([1.1, -0.1])
    with pytest.raises(SimplexError):
        validate_simplex([float("nan"), 1.0])
    with pytest.raises(SimplexError):
        validate_simplex([])


def test_lattice_and_grid_sizes() -> None:
    """Stars-and-bars counts and the interior margin filter."""
    assert lattice_compositions(3, 4).shape == (15, 3)
    assert np.all(lattice_compositions(3, 4).sum(axis=1) == 4)
    grid = barycentric_grid(3, 10, margin=0.2)
    assert grid.shape[0] > 0
    assert grid.min() >= 0.2 - 1e-12
    assert np.allclose(grid.sum(axis=1), 1.0)


def test_logistic_preset_matches_closed_form() -> None:
    """logistic1d has drift x(1-x) and variance x(1-x)/N on the first coordinate."""
    model = builtin("logistic1d", n_size=4)
    x = np.array([[0.3, 0.7], [0.9, 0.1]])
    field = model.drift_field(x)
    assert np.allclose(field[:, 0], x[:, 0] * x[:, 1])
    assert np.allclose(field.sum(axis=1), 0.0)
    covariance = model.covariance(x)
    assert np.allclose(covariance[:, 0, 0], x[:, 0] * x[:, 1])
    assert model.noise_scale == pytest.approx(0.5)


def test_unknown_preset_is_rejected() -> None:
    """Unknown preset names list the supported ones."""
    with pytest.raises(ModelError, match="logistic1d"):
        builtin("lotka")


def test_rate_covariance_matches_pair_sum() -> None:
    """Covariance of a rate model equals sum over pairs of (e_j-e_i)(e_j-e_i)^T (p_ij + p_ji)."""
    table = np.array([[0.0, 0.5, 1.5], [2.0, 0.0, 0.25], [0.75, 1.0, 0.0]])
    model = from_rates(RateSpec.constant(table))
    rng = np.random.default_rng(3)
    points = rng.dirichlet(np.ones(3), size=20)
    covariance = model.covariance(points)
    for k, x in enumerate(points):
        expected = np.zeros((3, 3))
        for i, j in combinations(range(3), 2):
            e = np.zeros(3)
            e[j], e[i] = 1.0, -1.0
            expected += np.outer(e, e) * x[i] * x[j] * (table[i, j] + table[j, i])
        assert np.allclose(covariance[k], expected, atol=1e-9)


def test_rate_channels_are_tangent() -> None:
    """Every noise channel column sums to zero."""
    model = rate_table_model([[0.0, 1.0, 2.0], [0.5, 0.0, 1.0], [1.0, 3.0, 0.0]])
    points = np.random.default_rng(5).dirichlet(np.ones(3), size=10)
    assert np.abs(model.diffusion_matrix(points).sum(axis=1)).max() < 1e-12


def test_rate_table_must_be_square() -> None:
    """Non-square tables are model errors."""
    with pytest.raises(ModelError):
        RateSpec.constant([[0.0, 1.0, 2.0]])


def test_weighted_samples_thinning_and_mean() -> None:
    """Thinning keeps at most the requested points and renormalizes weights."""
    points = np.random.default_rng(1).dirichlet(np.ones(2), size=100)
    samples = WeightedSamples.uniform(points)
    thin = samples.thinned(10)
    assert len(thin) == 10
    assert thin.weights.sum() == pytest.approx(1.0)
    assert np.allclose(WeightedSamples.dirac((0.25, 0.75)).mean(), [0.25, 0.75])
