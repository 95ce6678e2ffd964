from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.models.simplex import SimplexPoint


@dataclass(frozen=True)
class WeightedSamples:
    """Weighted empirical measure on the simplex; weights sum to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise ValueError("weighted samples need a nonempty (n, d) point array")
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("weights must have one entry per point")

    @classmethod
    def uniform(cls, points: np.ndarray) -> WeightedSamples:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        n = pts.shape[0]
        return cls(points=pts, weights=np.full(n, 1.0 / n) if n else np.empty(0))

    @classmethod
    def dirac(cls, point: SimplexPoint | np.ndarray | tuple[float, ...]) -> WeightedSamples:
        coords = point.as_array() if isinstance(point, SimplexPoint) else np.asarray(point, dtype=float)
        return cls(points=coords[None, :].copy(), weights=np.ones(1))

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def std(self) -> np.ndarray:
        centered = self.points - self.mean()
        return np.sqrt(self.weights @ (centered**2))

    def marginal(self, index: int = 0) -> np.ndarray:
        return self.points[:, index]

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw `count` support points according to the weights."""
        idx = rng.choice(len(self), size=count, replace=True, p=self.weights)
        return self.points[idx]

    def thinned(self, max_points: int) -> WeightedSamples:
        """Deterministic stride subsample keeping at most `max_points` points."""
        n = len(self)
        if n <= max_points:
            return self
        idx = np.linspace(0, n - 1, max_points).round().astype(np.int64)
        weights = self.weights[idx]
        return WeightedSamples(points=self.points[idx], weights=weights / weights.sum())
