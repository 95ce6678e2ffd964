from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Literal

VerdictStatus = Literal["PASS", "FAIL", "VACUOUS", "UNAVAILABLE"]


@dataclass(frozen=True)
class Verdict:
    """Outcome of checking one quantitative claim against its bound."""

    claim: str
    status: VerdictStatus
    value: float
    bound: float
    ci: tuple[float, float] = (math.nan, math.nan)
    note: str = ""

    def line(self) -> str:
        low, high = self.ci
        return (
            f"CLAIM {self.claim}: {self.status} value={self.value:.10g} bound={self.bound:.10g} "
            f"ci=[{low:.10g},{high:.10g}]"
        )


def any_failed(verdicts: Iterable[Verdict]) -> bool:
    return any(item.status == "FAIL" for item in verdicts)


def upper_bound_verdict(claim: str, value: float, bound: float, ci: tuple[float, float], note: str = "") -> Verdict:
    """PASS iff the upper confidence limit stays below `bound`; bounds >= 1 on probabilities are vacuous."""
    if not math.isfinite(bound):
        return Verdict(claim, "UNAVAILABLE", value, bound, ci, note)
    if bound >= 1.0:
        return Verdict(claim, "VACUOUS", value, bound, ci, note)
    return Verdict(claim, "PASS" if ci[1] <= bound else "FAIL", value, bound, ci, note)


def lower_bound_verdict(claim: str, value: float, bound: float, ci: tuple[float, float], note: str = "") -> Verdict:
    """PASS iff the point estimate reaches `bound`."""
    if not math.isfinite(value):
        return Verdict(claim, "UNAVAILABLE", value, bound, ci, note)
    return Verdict(claim, "PASS" if value >= bound else "FAIL", value, bound, ci, note)
