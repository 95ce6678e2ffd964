from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.presets import PRESET_NAMES
from app.stats.exponentiality import STEPHENS_CRITICAL

ExperimentKind = Literal["check", "flow", "simulate", "lln", "qsd", "spectral", "scaling", "beta", "convergence"]

CLAIM_EXPERIMENTS: frozenset[str] = frozenset({"simulate", "lln", "qsd", "scaling", "beta", "convergence"})

LIST_FIELDS: frozenset[str] = frozenset({"x0", "n_values", "deltas", "killing_margins", "eps_list"})
POINT_LIST_FIELDS: frozenset[str] = frozenset({"rates", "candidate"})


class ExperimentConfig(BaseModel):
    """One experiment declared in the line-oriented `key = value` format."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: ExperimentKind
    model: str = "logistic1d"
    rates: list[list[float]] | None = None
    noise_form: Literal["sqrt", "linear"] = "sqrt"
    noise_intensity: float | None = Field(default=None, gt=0)
    n_size: int = Field(default=1, ge=1)
    scheme: Literal["euler_clamp", "euler_reflect"] = "euler_clamp"
    dt: float = Field(default=1e-3, gt=0, le=1)
    horizon: float = Field(default=1.0, gt=0)
    seed: int | None = Field(default=None, ge=0)
    count: int = Field(default=1000, ge=1)
    x0: list[float] | None = None
    absorption_target: float = Field(default=0.999, ge=0, le=1)

    grid_resolution: int = Field(default=20, ge=2, le=2000)
    interior_margin: float = Field(default=0.0, ge=0, lt=0.5)
    lyapunov_delta: float = Field(default=0.02, gt=0, lt=0.5)
    lyapunov_alpha_floor: float = Field(default=0.0, ge=0)
    flow_method: Literal["rk4", "euler"] = "rk4"
    burn_in: float | None = Field(default=None, ge=0)

    estimator: Literal["fleming_viot", "pruning"] = "fleming_viot"
    particles: int = Field(default=1000, ge=2)
    killing_margin: float = Field(default=0.0, ge=0, lt=0.5)
    killing_margins: list[float] | None = None
    theta_samples: int = Field(default=1000, ge=0)
    exponentiality_level: float = 0.01

    grid_size: int = Field(default=1000, ge=100, le=200000)
    spectral_method: Literal["eigen", "shooting"] = "eigen"

    n_values: list[int] | None = None
    deltas: list[float] | None = None
    candidate: list[list[float]] | None = None
    neighborhood_radius: float = Field(default=0.1, gt=0, lt=1)
    eps_list: list[float] = Field(default_factory=lambda: [0.05, 0.01])
    invariant: Literal["dirac", "time_average"] = "dirac"
    min_relative_margin: float = Field(default=0.0, ge=0, lt=1)

    k_margin: float = Field(default=0.1, gt=0, lt=0.5)
    delta: float = Field(default=0.1, gt=0)
    trials: int = Field(default=200, ge=1)

    output_dir: str | None = None

    @field_validator("exponentiality_level")
    @classmethod
    def _tabulated_level(cls, value: float) -> float:
        if value not in STEPHENS_CRITICAL:
            raise ValueError(f"level must be one of: {', '.join(map(str, STEPHENS_CRITICAL))}")
        return value

    @field_validator("n_values")
    @classmethod
    def _positive_sizes(cls, value: list[int] | None) -> list[int] | None:
        if value is not None and (not value or min(value) < 1):
            raise ValueError("n_values must be a nonempty list of positive integers")
        return value

    @field_validator("deltas", "killing_margins", "eps_list")
    @classmethod
    def _positive_reals(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and (not value or min(value) < 0):
            raise ValueError("must be a nonempty list of nonnegative numbers")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> ExperimentConfig:
        if self.model == "rates":
            if self.rates is None:
                raise ValueError("model = rates requires a rates table")
        elif self.model not in PRESET_NAMES:
            raise ValueError(f"Unsupported model {self.model!r}. Use rates or one of: {', '.join(PRESET_NAMES)}.")
        elif self.rates is not None:
            raise ValueError("rates is only allowed with model = rates")
        if self.experiment in CLAIM_EXPERIMENTS and self.seed is None:
            raise ValueError(f"seed required for experiment {self.experiment}")
        if self.experiment == "lln" and (not self.n_values or not self.deltas):
            raise ValueError("experiment lln requires n_values and deltas")
        if self.experiment == "lln" and min(self.deltas or [1.0]) <= 0:
            raise ValueError("deltas must be positive")
        if self.experiment in ("scaling", "convergence") and (self.n_values is None or len(self.n_values) < 2):
            raise ValueError(f"experiment {self.experiment} requires at least two n_values")
        if self.estimator == "pruning" and self.killing_margin > 0:
            raise ValueError("estimator pruning conditions on exact absorption; killing_margin must be 0")
        if self.experiment == "scaling" and self.theta_samples < 1:
            raise ValueError("experiment scaling requires theta_samples >= 1")
        if self.burn_in is not None and self.burn_in >= self.horizon:
            raise ValueError("burn_in must be smaller than horizon")
        if self.horizon < self.dt:
            raise ValueError("horizon must be >= dt")
        return self
