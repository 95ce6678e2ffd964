from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from app.models.simplex import as_batch
from app.utils.errors import ModelError

DriftFn = Callable[[np.ndarray], np.ndarray]
"""Maps a (n, d) batch of simplex points to the (n, d) per-capita rates F(x)."""

SigmaFn = Callable[[np.ndarray], np.ndarray]
"""Maps a (n, d) batch of simplex points to the (n, d, l) matrices sigma(x)."""

RateFn = Callable[[int, int, np.ndarray], np.ndarray]
"""Maps (i, j, (n, d) batch) to the (n,) imitation intensities lambda_ij(x)."""

NoiseForm = Literal["sqrt", "linear"]


@dataclass(frozen=True)
class ModelSpec:
    """Diffusion dX = X∘F(X) dt + N^{-1/2} g(X)∘σ(X) dB on the simplex.

    `noise_form="sqrt"` uses g(x) = √x (the absorbed 1/2-Hölder class);
    `noise_form="linear"` uses g(x) = x, the Lipschitz comparison class whose
    paths stay in the open simplex. Drift and sigma are batch functions and
    must be pure, so concurrent workers can share one spec.
    """

    d: int
    l: int
    drift: DriftFn
    sigma: SigmaFn
    n_size: int = 1
    lipschitz_bound: float = 0.0
    ellipticity_floor: float = 0.0
    name: str = "custom"
    noise_form: NoiseForm = "sqrt"
    absorption_threshold: float = 0.0
    attractor_hint: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ModelError(f"model needs d >= 2 strategies, got d={self.d}")
        if self.l < 1:
            raise ModelError(f"model needs l >= 1 noise channels, got l={self.l}")
        if self.n_size < 1:
            raise ModelError(f"system size must be a positive integer, got {self.n_size}")
        if self.lipschitz_bound < 0 or self.ellipticity_floor < 0:
            raise ModelError("declared Lipschitz bound and ellipticity floor must be >= 0")
        if self.noise_form not in ("sqrt", "linear"):
            raise ModelError(f"unknown noise form {self.noise_form!r}")
        if self.absorption_threshold < 0:
            raise ModelError("absorption threshold must be >= 0")

    def with_size(self, n_size: int) -> ModelSpec:
        return replace(self, n_size=int(n_size))

    def with_noise_form(self, noise_form: NoiseForm) -> ModelSpec:
        return replace(self, noise_form=noise_form)

    @property
    def noise_scale(self) -> float:
        return 1.0 / math.sqrt(self.n_size)

    def drift_values(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        """F(x) for a point or a batch."""
        batch, single = as_batch(x)
        values = np.asarray(self.drift(batch), dtype=float)
        if values.shape != batch.shape:
            raise ModelError(f"drift of {self.name} returned shape {values.shape}, expected {batch.shape}")
        return values[0] if single else values

    def sigma_values(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        """σ(x) for a point or a batch, shape (d, l) or (n, d, l)."""
        batch, single = as_batch(x)
        values = np.asarray(self.sigma(batch), dtype=float)
        expected = (batch.shape[0], self.d, self.l)
        if values.shape != expected:
            raise ModelError(f"sigma of {self.name} returned shape {values.shape}, expected {expected}")
        return values[0] if single else values

    def drift_field(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        """Effective drift x∘F(x)."""
        batch, single = as_batch(x)
        values = batch * self.drift_values(batch)
        return values[0] if single else values

    def diffusion_matrix(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        """Effective diffusion g(x)∘σ(x) without the N^{-1/2} factor."""
        batch, single = as_batch(x)
        weight = np.sqrt(np.maximum(batch, 0.0)) if self.noise_form == "sqrt" else batch
        values = weight[:, :, None] * self.sigma_values(batch)
        return values[0] if single else values

    def covariance(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        """Σ(x) = (g∘σ)(g∘σ)^T without the 1/N factor."""
        s = self.diffusion_matrix(x)
        return s @ np.swapaxes(s, -1, -2)

    def sigma_gram_diagonal(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        """diag(σσ*)(x), the quantity bounded below by the ellipticity hypothesis."""
        sig = self.sigma_values(x)
        return (sig**2).sum(axis=-1)


@dataclass(frozen=True)
class RateSpec:
    """Pairwise imitation intensities lambda_ij(x) between d strategies.

    The switching probability from i to j is p_ij(x) = x_i x_j lambda_ij(x).
    """

    d: int
    intensity: RateFn

    @classmethod
    def constant(cls, matrix: Sequence[Sequence[float]] | np.ndarray) -> RateSpec:
        """Constant intensities; `matrix[i][j]` is lambda_ij, the diagonal is ignored."""
        table = np.asarray(matrix, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ModelError(f"rate table must be square, got shape {table.shape}")

        def intensity(i: int, j: int, x: np.ndarray) -> np.ndarray:
            return np.full(x.shape[0], table[i, j])

        return cls(d=table.shape[0], intensity=intensity)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """(n, d, d) array of lambda_ij(x) with a zero diagonal."""
        n = x.shape[0]
        table = np.zeros((n, self.d, self.d))
        for i in range(self.d):
            for j in range(self.d):
                if i != j:
                    table[:, i, j] = self.intensity(i, j, x)
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ModelError("imitation intensities must be finite and nonnegative on the simplex")
        return table
