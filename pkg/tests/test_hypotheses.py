from __future__ import annotations

import numpy as np
import pytest

from app.models.hypotheses import check_hypotheses
from app.models.presets import builtin
from app.models.spec import ModelSpec


def test_logistic_hypotheses_on_interior() -> None:
    """On an interior grid logistic1d passes H1, H2, H4 and is PARTIAL on H3, H5."""
    report = check_hypotheses(builtin("logistic1d"), grid_resolution=20, interior_margin=0.05)
    assert report.statuses == {1: "PASS", 2: "PASS", 3: "PARTIAL", 4: "PASS", 5: "PARTIAL"}
    assert report.format_lines()[2].startswith("H3: PARTIAL")


def test_ellipticity_fails_on_the_closed_simplex() -> None:
    """diag(σσ*) vanishes at the vertices, so H5 fails with zero margin."""
    report = check_hypotheses(builtin("logistic1d"), grid_resolution=10, interior_margin=0.0)
    assert report.entry(5).status == "FAIL"
    assert report.entry(5).residual == pytest.approx(0.0)


def test_understated_lipschitz_bound_fails() -> None:
    """A declared Lipschitz bound below the observed slope is reported with a witness."""
    model = builtin("hawk_dove")
    weak = ModelSpec(d=model.d, l=model.l, drift=model.drift, sigma=model.sigma, lipschitz_bound=0.1, name="weak")
    entry = check_hypotheses(weak, grid_resolution=20, interior_margin=0.0).entry(1)
    assert entry.status == "FAIL"
    assert entry.residual > 0
    assert entry.witness is not None


def test_non_tangent_drift_fails_h2() -> None:
    """A drift with nonzero sum of x∘F is caught by H2."""

    def drift(x: np.ndarray) -> np.ndarray:
        return np.ones_like(x)

    model = builtin("logistic1d")
    bad = ModelSpec(d=2, l=model.l, drift=drift, sigma=model.sigma, lipschitz_bound=1.0, name="bad")
    assert check_hypotheses(bad, grid_resolution=10, interior_margin=0.1).entry(2).status == "FAIL"


def test_margin_outside_range_is_rejected() -> None:
    """The interior margin must lie in [0, 1/d)."""
    with pytest.raises(ValueError):
        check_hypotheses(builtin("rps"), grid_resolution=10, interior_margin=0.5)


def test_zero_noise_fails_ellipticity_everywhere() -> None:
    """With σ ≡ 0 the diagonal of σσ* vanishes even on the interior grid."""

    def sigma(x: np.ndarray) -> np.ndarray:
        return np.zeros((x.shape[0], 2, 1))

    model = builtin("hawk_dove")
    silent = ModelSpec(d=2, l=1, drift=model.drift, sigma=sigma, lipschitz_bound=model.lipschitz_bound, name="silent")
    report = check_hypotheses(silent, grid_resolution=20, interior_margin=0.05)
    assert report.entry(5).status == "FAIL"
    assert report.entry(5).residual == 0.0
    assert report.entry(4).status == "PASS"
