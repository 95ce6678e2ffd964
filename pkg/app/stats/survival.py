from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.sde.simulator import TrajectoryBatch


@dataclass(frozen=True)
class SurvivalCurve:
    """Kaplan–Meier estimate of P[tau > t] with Greenwood standard errors.

    `times[0]` is 0 with survival 1; each later entry is a distinct absorption
    time. Paths alive at the horizon are right-censored.
    """

    times: np.ndarray
    survival: np.ndarray
    standard_errors: np.ndarray
    at_risk: np.ndarray
    horizon: float
    fully_censored: bool

    def value(self, t: float | np.ndarray) -> np.ndarray:
        """Right-continuous step function evaluated at t."""
        index = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return self.survival[np.clip(index, 0, None)]

    def header(self) -> list[str]:
        return ["t", "survival", "se", "at_risk"]

    def rows(self) -> list[list[float]]:
        return [
            [float(t), float(s), float(e), int(n)]
            for t, s, e, n in zip(self.times, self.survival, self.standard_errors, self.at_risk)
        ]


def kaplan_meier(observed: np.ndarray, events: np.ndarray, horizon: float) -> SurvivalCurve:
    """Product-limit estimator for right-censored times (`events` marks absorptions)."""
    observed = np.asarray(observed, dtype=float)
    events = np.asarray(events, dtype=bool)
    if observed.size == 0:
        raise ValueError("survival curve needs at least one path")
    event_times = np.unique(observed[events])
    times = [0.0]
    survival = [1.0]
    errors = [0.0]
    at_risk = [int(observed.size)]
    current = 1.0
    greenwood = 0.0
    for t in event_times:
        risk = int((observed >= t).sum())
        deaths = int(((observed == t) & events).sum())
        current *= 1.0 - deaths / risk
        if risk > deaths:
            greenwood += deaths / (risk * (risk - deaths))
            error = current * np.sqrt(greenwood)
        else:
            error = 0.0
        times.append(float(t))
        survival.append(current)
        errors.append(float(error))
        at_risk.append(risk)
    return SurvivalCurve(
        times=np.asarray(times),
        survival=np.asarray(survival),
        standard_errors=np.asarray(errors),
        at_risk=np.asarray(at_risk),
        horizon=float(horizon),
        fully_censored=not bool(events.any()),
    )


def survival_curve(batch: TrajectoryBatch) -> SurvivalCurve:
    return kaplan_meier(batch.observed_times, batch.absorbed, batch.horizon)


def max_standardized_gap(curve: SurvivalCurve, theta: float) -> float:
    """Largest |S(t) - exp(-theta t)| / se(t) over event times with se > 0."""
    usable = curve.standard_errors > 0
    if not np.any(usable):
        return 0.0
    gaps = np.abs(curve.survival[usable] - np.exp(-theta * curve.times[usable]))
    return float((gaps / curve.standard_errors[usable]).max())
