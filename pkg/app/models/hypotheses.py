from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from app.config import settings
from app.models.simplex import barycenter, lattice_compositions
from app.models.spec import ModelSpec

logger = logging.getLogger(__name__)

Status = Literal["PASS", "PARTIAL", "FAIL"]

SMOOTHNESS_GROWTH_LIMIT = 4.0
SMOOTHNESS_DIVISORS = (1.0, 4.0, 16.0, 64.0, 256.0)


@dataclass(frozen=True)
class HypothesisEntry:
    """Outcome of one standing-hypothesis audit."""

    index: int
    title: str
    status: Status
    residual: float
    witness: tuple[float, ...] | None = None
    note: str = ""

    def line(self) -> str:
        witness = "-" if self.witness is None else "(" + ",".join(f"{v:.6g}" for v in self.witness) + ")"
        return f"H{self.index}: {self.status} residual={self.residual:.10g} witness={witness}"


@dataclass(frozen=True)
class HypothesisReport:
    model_name: str
    grid_resolution: int
    interior_margin: float
    grid_points: int
    lipschitz_estimate: float
    max_tangency_residual: float
    max_channel_residual: float
    min_sigma_diagonal: float
    entries: tuple[HypothesisEntry, ...] = field(default_factory=tuple)

    def entry(self, index: int) -> HypothesisEntry:
        for item in self.entries:
            if item.index == index:
                return item
        raise KeyError(f"no hypothesis H{index} in report")

    @property
    def statuses(self) -> dict[int, Status]:
        return {item.index: item.status for item in self.entries}

    def format_lines(self) -> list[str]:
        return [item.line() for item in self.entries]


def _audit_grid(d: int, resolution: int, margin: float) -> tuple[np.ndarray, np.ndarray]:
    compositions = lattice_compositions(d, resolution)
    points = compositions / float(resolution)
    keep = points.min(axis=1) >= margin - 1e-12
    if not np.any(keep):
        # lattice too coarse for the margin: fall back to the barycenter alone
        center = barycenter(d).as_array()
        return center[None, :], np.zeros((1, d), dtype=np.int64)
    return points[keep], compositions[keep]


def _lipschitz_estimate(model: ModelSpec, points: np.ndarray, compositions: np.ndarray) -> tuple[float, tuple[float, ...] | None]:
    """Max of |F(p) - F(q)| / |p - q| over lattice-neighbour pairs of the grid."""
    if points.shape[0] < 2:
        return 0.0, None
    lookup = {tuple(row): k for k, row in enumerate(compositions.tolist())}
    values = model.drift_values(points)
    left: list[int] = []
    right: list[int] = []
    d = model.d
    for k, row in enumerate(compositions.tolist()):
        for i in range(d):
            if row[i] == 0:
                continue
            for j in range(i + 1, d):
                shifted = list(row)
                shifted[i] -= 1
                shifted[j] += 1
                other = lookup.get(tuple(shifted))
                if other is not None:
                    left.append(k)
                    right.append(other)
    if not left:
        return 0.0, None
    a = np.asarray(left)
    b = np.asarray(right)
    ratios = np.linalg.norm(values[a] - values[b], axis=1) / np.linalg.norm(points[a] - points[b], axis=1)
    worst = int(np.argmax(ratios))
    return float(ratios[worst]), tuple(float(v) for v in points[a[worst]])


def _segment_point(d: int, face: int, s: float) -> np.ndarray:
    """Point on the segment from the barycenter to the centre of face `face` with x_face = s."""
    x = np.full(d, (1.0 - s) / (d - 1))
    x[face] = s
    return x


def _smoothness_probe(model: ModelSpec, margin: float) -> tuple[Status, float, tuple[float, ...] | None]:
    """Finite-difference derivative growth of sigma while approaching each face."""
    start = margin if margin > 0 else 0.05
    d = model.d
    worst_growth = 0.0
    worst_point: tuple[float, ...] | None = None
    for face in range(d):
        slopes = []
        points = []
        for divisor in SMOOTHNESS_DIVISORS:
            s = start / divisor
            h = s / 10.0
            upper = model.sigma_values(_segment_point(d, face, s + h))
            lower = model.sigma_values(_segment_point(d, face, s - h))
            slope = float(np.linalg.norm(upper - lower) / (2.0 * h))
            slopes.append(slope)
            points.append(_segment_point(d, face, s))
        if not all(np.isfinite(slopes)):
            bad = next(k for k, v in enumerate(slopes) if not np.isfinite(v))
            return "FAIL", float("inf"), tuple(float(v) for v in points[bad])
        reference = max(slopes[0], settings.audit_tolerance)
        if max(slopes) <= settings.audit_tolerance:
            continue
        growth = max(slopes) / reference
        if growth > worst_growth:
            worst_growth = growth
            worst_point = tuple(float(v) for v in points[int(np.argmax(slopes))])
    if worst_growth > SMOOTHNESS_GROWTH_LIMIT:
        return "PARTIAL", worst_growth, worst_point
    return "PASS", worst_growth, None


def check_hypotheses(model: ModelSpec, grid_resolution: int, interior_margin: float) -> HypothesisReport:
    """Audit the five standing hypotheses of `model` on a barycentric grid.

    H1 Lipschitz drift (finite differences against the declared bound),
    H2 tangency of the drift, H3 smoothness of sigma near the faces,
    H4 tangency of every noise channel, H5 ellipticity of diag(σσ*).
    The grid keeps lattice points with min_i x_i >= interior_margin, so
    H3 and H5 report PARTIAL when they hold on that interior only.
    """
    if grid_resolution < 2:
        raise ValueError(f"grid_resolution must be >= 2, got {grid_resolution}")
    if not 0.0 <= interior_margin < 1.0 / model.d:
        raise ValueError(f"interior_margin must lie in [0, 1/d), got {interior_margin}")

    tolerance = settings.audit_tolerance
    points, compositions = _audit_grid(model.d, grid_resolution, interior_margin)
    logger.info(
        "Step: check_hypotheses start model=%s grid_points=%s margin=%s",
        model.name,
        points.shape[0],
        interior_margin,
    )

    lipschitz, lipschitz_witness = _lipschitz_estimate(model, points, compositions)
    excess = max(0.0, lipschitz - model.lipschitz_bound)
    h1_ok = lipschitz <= model.lipschitz_bound * (1.0 + 1e-6) + tolerance
    h1 = HypothesisEntry(
        index=1,
        title="Lipschitz drift",
        status="PASS" if h1_ok else "FAIL",
        residual=excess,
        witness=None if h1_ok else lipschitz_witness,
        note=f"estimate={lipschitz:.6g} declared={model.lipschitz_bound:.6g}",
    )

    tangency = np.abs((points * model.drift_values(points)).sum(axis=1))
    worst = int(np.argmax(tangency))
    h2_ok = bool(tangency[worst] <= tolerance)
    h2 = HypothesisEntry(
        index=2,
        title="drift tangent to the simplex",
        status="PASS" if h2_ok else "FAIL",
        residual=float(tangency[worst]),
        witness=None if h2_ok else tuple(float(v) for v in points[worst]),
    )

    h3_status, growth, h3_witness = _smoothness_probe(model, interior_margin)
    h3 = HypothesisEntry(
        index=3,
        title="sigma continuously differentiable",
        status=h3_status,
        residual=growth,
        witness=h3_witness,
        note="derivative of sigma grows toward the boundary" if h3_status == "PARTIAL" else "",
    )

    channel_sums = np.abs(model.diffusion_matrix(points).sum(axis=1)).max(axis=1)
    worst = int(np.argmax(channel_sums))
    h4_ok = bool(channel_sums[worst] <= tolerance)
    h4 = HypothesisEntry(
        index=4,
        title="noise channels tangent to the simplex",
        status="PASS" if h4_ok else "FAIL",
        residual=float(channel_sums[worst]),
        witness=None if h4_ok else tuple(float(v) for v in points[worst]),
    )

    diagonal = model.sigma_gram_diagonal(points).min(axis=1)
    worst = int(np.argmin(diagonal))
    min_diagonal = float(diagonal[worst])
    if min_diagonal <= 0.0 or min_diagonal <= model.ellipticity_floor:
        h5_status: Status = "FAIL"
    elif interior_margin > 0.0:
        h5_status = "PARTIAL"
    else:
        h5_status = "PASS"
    h5 = HypothesisEntry(
        index=5,
        title="ellipticity of diag(sigma sigma*)",
        status=h5_status,
        residual=min_diagonal,
        witness=tuple(float(v) for v in points[worst]),
        note=f"holds only on interior margin {interior_margin:g}" if h5_status == "PARTIAL" else "",
    )

    report = HypothesisReport(
        model_name=model.name,
        grid_resolution=grid_resolution,
        interior_margin=interior_margin,
        grid_points=int(points.shape[0]),
        lipschitz_estimate=lipschitz,
        max_tangency_residual=h2.residual,
        max_channel_residual=h4.residual,
        min_sigma_diagonal=min_diagonal,
        entries=(h1, h2, h3, h4, h5),
    )
    logger.info(
        "Step: check_hypotheses done model=%s statuses=%s",
        model.name,
        ",".join(f"H{k}={v}" for k, v in report.statuses.items()),
    )
    return report
