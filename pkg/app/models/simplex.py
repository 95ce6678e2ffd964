from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from app.utils.errors import SimplexError

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class SimplexPoint:
    """A point of the (d-1)-dimensional probability simplex in R^d."""

    coords: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def is_boundary(self, threshold: float = 0.0) -> bool:
        """True when some coordinate is at or below the absorption threshold."""
        return min(self.coords) <= threshold

    def zero_face(self, threshold: float = 0.0) -> tuple[int, ...]:
        """0-based indices of the coordinates at or below the threshold."""
        return tuple(i for i, value in enumerate(self.coords) if value <= threshold)


def validate_simplex(coords: Sequence[float] | np.ndarray, tolerance: float = 1e-9) -> SimplexPoint:
    """Check `coords` against the simplex and return the projected point.

    Negatives within `tolerance` are clamped to 0 and the result is divided by
    its sum. A point whose exact sum is already 1 up to rounding is returned
    unchanged, so validating an output again is bitwise idempotent.
    """
    values = np.asarray(coords, dtype=float).ravel()
    if values.size == 0:
        raise SimplexError("simplex coordinates must be nonempty")
    if not np.all(np.isfinite(values)):
        raise SimplexError(f"non-finite simplex coordinates: {values.tolist()}")
    if np.any(values < -tolerance):
        raise SimplexError(f"negative coordinate below -{tolerance:g}: {values.tolist()}")
    total = math.fsum(values.tolist())
    if abs(total - 1.0) > tolerance:
        raise SimplexError(f"coordinates sum to {total!r}, expected 1 within {tolerance:g}")

    clamped = np.maximum(values, 0.0)
    clamped_total = math.fsum(clamped.tolist())
    if clamped_total <= 0.0:
        raise SimplexError("all simplex coordinates are zero")
    if np.array_equal(clamped, values) and abs(clamped_total - 1.0) <= values.size * _EPS:
        return SimplexPoint(tuple(float(v) for v in values))
    return SimplexPoint(tuple(float(v) for v in clamped / clamped_total))


def as_batch(x: np.ndarray | Sequence[float] | SimplexPoint) -> tuple[np.ndarray, bool]:
    """Promote a point to a (1, d) batch; report whether promotion happened."""
    if isinstance(x, SimplexPoint):
        return x.as_array()[None, :], True
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise SimplexError(f"expected a point or a (n, d) batch, got shape {arr.shape}")
    return arr, False


def renormalize(x: np.ndarray) -> np.ndarray:
    """Divide every row by its coordinate sum."""
    return x / x.sum(axis=-1, keepdims=True)


def barycenter(d: int) -> SimplexPoint:
    return SimplexPoint(tuple([1.0 / d] * d))


def vertex(d: int, index: int) -> SimplexPoint:
    coords = [0.0] * d
    coords[index] = 1.0
    return SimplexPoint(tuple(coords))


def lattice_compositions(d: int, resolution: int) -> np.ndarray:
    """All nonnegative integer vectors of length d summing to `resolution`.

    Rows come in lexicographic stars-and-bars order, which fixes the order of
    every grid-based audit and witness.
    """
    if d < 1 or resolution < 0:
        raise ValueError("lattice needs d >= 1 and resolution >= 0")
    if d == 1:
        return np.array([[resolution]], dtype=np.int64)
    slots = resolution + d - 1
    bars = np.array(list(combinations(range(slots), d - 1)), dtype=np.int64)
    edges = np.concatenate(
        [np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), slots)],
        axis=1,
    )
    return np.diff(edges, axis=1) - 1


def barycentric_grid(d: int, resolution: int, margin: float = 0.0) -> np.ndarray:
    """Uniform barycentric lattice k/resolution restricted to min_i x_i >= margin."""
    if resolution < 1:
        raise ValueError("grid resolution must be >= 1")
    points = lattice_compositions(d, resolution) / float(resolution)
    keep = points.min(axis=1) >= margin - 1e-12
    return points[keep]
