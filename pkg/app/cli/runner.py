from __future__ import annotations

import logging
import math
from collections.abc import Callable
from time import perf_counter

import numpy as np

from app import __version__
from app.cli.parser import echo_config
from app.cli.schemas import ExperimentConfig
from app.config import settings
from app.flow.attractor import AttractorProbe, probe_attractor
from app.flow.integrator import integrate_flow
from app.models.hypotheses import check_hypotheses
from app.models.presets import builtin, rate_table_model
from app.models.spec import ModelSpec
from app.qsd.estimate import QsdEstimate
from app.qsd.fleming_viot import default_start, fleming_viot
from app.qsd.pruning import pruning_estimate
from app.qsd.spectral import spectral_qsd
from app.qsd.theta import ThetaFit, theta_from_qsd
from app.sde.lyapunov import lyapunov_drift_check
from app.sde.simulator import simulate_batch, simulate_path
from app.stats.beta import beta_study, beta_trend
from app.stats.convergence import convergence_study, invariant_reference, qsd_vs_invariant
from app.stats.distances import eps_stability
from app.stats.exponentiality import exponentiality_test
from app.stats.intervals import wilson_interval
from app.stats.lln import lln_bound_check
from app.stats.scaling import scaling_study
from app.stats.survival import max_standardized_gap, survival_curve
from app.stats.verdicts import Verdict, any_failed, lower_bound_verdict
from app.store.results import CONFIG_ECHO_FILE, ResultStore
from app.utils.errors import (
    AttractorError,
    ConfigError,
    InsufficientDataError,
    NumericalError,
    PreconditionError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CLAIM_FAILED = 3

SPECTRAL_RESIDUAL_LIMIT = 1e-6
SPECTRAL_AGREEMENT_LIMIT = 0.05
THETA_AGREEMENT_SIGMAS = 3.0


def build_model(config: ExperimentConfig, n_size: int | None = None) -> ModelSpec:
    size = config.n_size if n_size is None else n_size
    if config.model == "rates":
        assert config.rates is not None
        return rate_table_model(config.rates, n_size=size, noise_form=config.noise_form)
    return builtin(config.model, n_size=size, noise_form=config.noise_form, noise_intensity=config.noise_intensity)


class ExperimentRunner:
    """Runs one parsed experiment and writes its artifacts.

    The runner owns sequencing and the mapping from exceptions to exit codes;
    every computation is delegated to the library modules, and every file
    goes through the ResultStore.
    """

    def __init__(self, config: ExperimentConfig, store: ResultStore, workers: int | None = None) -> None:
        self.config = config
        self.store = store
        self.workers = workers or settings.workers
        self.model = build_model(config)
        self._handlers: dict[str, Callable[[], list[Verdict]]] = {
            "check": self._check,
            "flow": self._flow,
            "simulate": self._simulate,
            "lln": self._lln,
            "qsd": self._qsd,
            "spectral": self._spectral,
            "scaling": self._scaling,
            "beta": self._beta,
            "convergence": self._convergence,
        }

    @property
    def seed(self) -> int:
        return 0 if self.config.seed is None else self.config.seed

    def run(self) -> int:
        """Run the experiment; 0 ok, 1 config/precondition, 2 numerical, 3 failed claim."""
        started_at = perf_counter()
        kind = self.config.experiment
        self.store.initialize()
        self.store.write_text(CONFIG_ECHO_FILE, echo_config(self.config))
        logger.info("Step: %s start model=%s seed=%s workers=%s", kind, self.model.name, self.config.seed, self.workers)
        status = "ok"
        exit_code = EXIT_OK
        try:
            verdicts = self._handlers[kind]()
        except (ConfigError, PreconditionError) as exc:
            logger.error("Experiment %s refused: %s", kind, exc)
            status, exit_code = f"refused: {exc}", EXIT_CONFIG
        except (NumericalError, InsufficientDataError) as exc:
            logger.error("Experiment %s failed numerically: %s", kind, exc)
            status, exit_code = f"numerical failure: {exc}", EXIT_NUMERICAL
        except ValueError as exc:
            logger.error("Experiment %s rejected its parameters: %s", kind, exc)
            status, exit_code = f"invalid parameters: {exc}", EXIT_CONFIG
        else:
            self.store.write_verdicts(verdicts)
            for verdict in verdicts:
                logger.info("%s", verdict.line())
            if any_failed(verdicts):
                status, exit_code = "claim failed", EXIT_CLAIM_FAILED
        elapsed = perf_counter() - started_at
        self.store.write_manifest(
            {
                "tool": settings.app_name,
                "version": __version__,
                "experiment": kind,
                "model": self.model.name,
                "seed": "none" if self.config.seed is None else self.config.seed,
                "workers": self.workers,
                "wall_time_seconds": round(elapsed, 3),
                "status": status,
                "exit_code": exit_code,
            }
        )
        logger.info("Step: %s done exit_code=%s elapsed=%.3fs", kind, exit_code, elapsed)
        return exit_code

    def _start(self, model: ModelSpec | None = None) -> np.ndarray:
        if self.config.x0 is not None:
            return np.asarray(self.config.x0, dtype=float)
        return default_start(model or self.model, self.config.killing_margin)

    def _check(self) -> list[Verdict]:
        cfg = self.config
        report = check_hypotheses(self.model, cfg.grid_resolution, cfg.interior_margin)
        lines = [
            f"model = {report.model_name}",
            f"grid_points = {report.grid_points}",
            f"lipschitz_estimate = {report.lipschitz_estimate:.10g}",
            *report.format_lines(),
        ]
        verdicts: list[Verdict] = []
        if cfg.lyapunov_delta < 1.0 / self.model.d:
            for coordinate in range(self.model.d):
                lyapunov = lyapunov_drift_check(self.model, coordinate, cfg.lyapunov_delta, cfg.grid_resolution)
                lines.append(lyapunov.line())
                passed = lyapunov.passed and lyapunov.alpha > cfg.lyapunov_alpha_floor
                verdicts.append(
                    Verdict(
                        f"lyapunov_alpha x{coordinate + 1}",
                        "PASS" if passed else "FAIL",
                        lyapunov.alpha,
                        cfg.lyapunov_alpha_floor,
                        note=f"delta={cfg.lyapunov_delta:g}",
                    )
                )
        else:
            logger.warning("Lyapunov collar %s is not below 1/d; diagnostic skipped", cfg.lyapunov_delta)
        self.store.write_lines("hypotheses.txt", lines)
        return verdicts

    def _flow(self) -> list[Verdict]:
        cfg = self.config
        trajectory = integrate_flow(self.model, self._start(), cfg.horizon, cfg.dt, method=cfg.flow_method)
        self.store.write_csv("flow.csv", trajectory.header(), trajectory.rows())
        if cfg.candidate is not None:
            probe = self._probe(cfg.candidate)
            self.store.write_lines(
                "attractor.txt",
                [f"eps = {eps:g} T = {time:.10g}" for eps, time in sorted(probe.convergence_times.items())],
            )
        return []

    def _simulate(self) -> list[Verdict]:
        cfg = self.config
        start = self._start()
        batch = simulate_batch(
            self.model,
            start,
            cfg.horizon,
            cfg.dt,
            scheme=cfg.scheme,
            seed=self.seed,
            count=cfg.count,
            killing_margin=cfg.killing_margin,
            workers=self.workers,
        )
        self.store.write_csv("paths.csv", batch.header(), batch.rows())
        curve = survival_curve(batch)
        self.store.write_csv("survival.csv", curve.header(), curve.rows())
        path = simulate_path(self.model, start, cfg.horizon, cfg.dt, scheme=cfg.scheme, seed=self.seed, stream=0)
        self.store.write_csv("path_0.csv", path.header(), path.rows())
        self.store.write_lines("summary.txt", [f"{key} = {value:.10g}" for key, value in batch.summary().items()])
        absorbed = int(batch.absorbed.sum())
        return [
            lower_bound_verdict(
                "finite_time_absorption",
                batch.absorbed_fraction,
                cfg.absorption_target,
                wilson_interval(absorbed, batch.count),
                note=f"horizon={cfg.horizon:g}",
            )
        ]

    def _lln(self) -> list[Verdict]:
        cfg = self.config
        assert cfg.deltas is not None and cfg.n_values is not None
        report = lln_bound_check(
            self.model,
            self._start(),
            cfg.horizon,
            cfg.deltas,
            cfg.n_values,
            cfg.dt,
            self.seed,
            cfg.count,
            scheme=cfg.scheme,
            workers=self.workers,
        )
        self.store.write_csv("lln.csv", report.header(), report.csv_rows())
        return list(report.verdicts)

    def _fleming_viot(self, model: ModelSpec, killing_margin: float | None = None) -> QsdEstimate:
        cfg = self.config
        margin = cfg.killing_margin if killing_margin is None else killing_margin
        return fleming_viot(
            model,
            cfg.particles,
            cfg.horizon,
            cfg.dt,
            burn_in=cfg.burn_in,
            seed=self.seed,
            killing_margin=margin,
            scheme=cfg.scheme,
            initial=self.config.x0,
        )

    def _estimate_qsd(self) -> QsdEstimate:
        cfg = self.config
        if cfg.estimator == "pruning":
            return pruning_estimate(
                self.model,
                self._start(),
                cfg.horizon,
                cfg.dt,
                self.seed,
                cfg.particles,
                scheme=cfg.scheme,
                workers=self.workers,
            )
        return self._fleming_viot(self.model)

    def _theta_agreement(self, estimate: QsdEstimate, fit: ThetaFit) -> Verdict:
        gap = abs(estimate.theta - fit.theta)
        tolerance = THETA_AGREEMENT_SIGMAS * math.hypot(estimate.theta_se, fit.standard_error)
        if gap > tolerance:
            logger.warning("Particle and absorption-time theta differ by %.3g > %.3g", gap, tolerance)
        return Verdict("theta_agreement", "PASS" if gap <= tolerance else "FAIL", gap, tolerance, (fit.ci_low, fit.ci_high))

    def _qsd(self) -> list[Verdict]:
        cfg = self.config
        estimate = self._estimate_qsd()
        self.store.write_csv("qsd_samples.csv", estimate.header(), estimate.rows())
        lines = [estimate.report_line()]
        verdicts: list[Verdict] = []

        if cfg.theta_samples > 0:
            fit = theta_from_qsd(self.model, estimate, cfg.dt, self.seed, cfg.theta_samples, scheme=cfg.scheme, workers=self.workers)
            self.store.write_csv("taus.csv", fit.batch.header(), fit.batch.rows())
            curve = survival_curve(fit.batch)
            self.store.write_csv("survival.csv", curve.header(), curve.rows())
            lines.append(
                f"theta_fit={fit.theta:.17g} se={fit.standard_error:.17g} ks={fit.ks_distance:.10g} "
                f"censored={fit.censored_fraction:.10g} max_survival_gap_sigmas={max_standardized_gap(curve, fit.theta):.6g}"
            )
            test = exponentiality_test(fit.batch.absorbed_taus, cfg.exponentiality_level)
            verdicts.append(
                Verdict(
                    "exponential_absorption",
                    "PASS" if test.passed else "FAIL",
                    test.modified_statistic,
                    test.critical_value,
                    note=f"level={test.level:g}",
                )
            )
            if estimate.method == "fleming_viot":
                verdicts.append(self._theta_agreement(estimate, fit))

        if self.model.name == "logistic1d" and self.model.noise_form == "sqrt" and cfg.killing_margin == 0:
            solution = spectral_qsd(cfg.grid_size, n_size=self.model.n_size, method=cfg.spectral_method)
            self.store.write_csv("spectral.csv", solution.header(), solution.rows())
            report = qsd_vs_invariant(estimate, solution.as_measure(), seed=self.seed)
            lines.append(f"spectral_lambda={solution.eigenvalue:.17g} w1={report.distance:.10g}")
            verdicts.append(
                Verdict(
                    "spectral_agreement",
                    "PASS" if report.distance < SPECTRAL_AGREEMENT_LIMIT else "FAIL",
                    report.distance,
                    SPECTRAL_AGREEMENT_LIMIT,
                    (report.ci_low, report.ci_high),
                )
            )

        if cfg.killing_margins:
            reference = estimate if estimate.killing_margin == 0 else self._fleming_viot(self.model, 0.0)
            killed = {eps: self._fleming_viot(self.model, eps).samples for eps in cfg.killing_margins if eps > 0}
            trend = eps_stability(killed, reference.samples, seed=self.seed)
            self.store.write_csv("eps_stability.csv", trend.header(), trend.rows())
            verdicts.append(trend.verdict)

        self.store.write_lines("qsd.txt", lines)
        return verdicts

    def _spectral(self) -> list[Verdict]:
        cfg = self.config
        solution = spectral_qsd(cfg.grid_size, n_size=cfg.n_size, method=cfg.spectral_method)
        self.store.write_csv("spectral.csv", solution.header(), solution.rows())
        left, right = solution.endpoint_exponents
        self.store.write_lines(
            "spectral.txt",
            [
                f"lambda = {solution.eigenvalue:.17g}",
                f"residual = {solution.residual:.6g}",
                f"endpoint_exponents = {left:.6g}, {right:.6g}",
                f"method = {solution.method}",
            ],
        )
        status = "PASS" if solution.residual < SPECTRAL_RESIDUAL_LIMIT else "FAIL"
        return [Verdict("spectral_residual", status, solution.residual, SPECTRAL_RESIDUAL_LIMIT)]

    def _probe(self, candidate: list[list[float]] | tuple[tuple[float, ...], ...] | None) -> AttractorProbe:
        cfg = self.config
        points = candidate if candidate is not None else self.model.attractor_hint
        if not points:
            raise PreconditionError(f"model {self.model.name} has no attractor candidate; set candidate = ...")
        try:
            return probe_attractor(self.model, points, cfg.neighborhood_radius, cfg.eps_list, cfg.grid_resolution)
        except AttractorError as exc:
            raise PreconditionError(f"attractor probe refused the candidate: {exc}") from exc

    def _scaling(self) -> list[Verdict]:
        cfg = self.config
        assert cfg.n_values is not None
        probe = self._probe(cfg.candidate)
        report = scaling_study(
            self.model,
            cfg.n_values,
            probe,
            cfg.particles,
            cfg.horizon,
            cfg.dt,
            burn_in=cfg.burn_in,
            seed=self.seed,
            theta_samples=cfg.theta_samples,
            scheme=cfg.scheme,
            workers=self.workers,
        )
        self.store.write_csv("scaling.csv", report.header(), report.csv_rows())
        return list(report.verdicts)

    def _beta(self) -> list[Verdict]:
        cfg = self.config
        reports = []
        verdicts: list[Verdict] = []
        for n in cfg.n_values or [cfg.n_size]:
            sized = self.model.with_size(n)
            qsd = self._fleming_viot(sized)
            report = beta_study(
                sized,
                cfg.k_margin,
                cfg.delta,
                cfg.grid_resolution,
                cfg.dt,
                self.seed,
                cfg.trials,
                scheme=cfg.scheme,
                qsd=qsd,
                workers=self.workers,
            )
            self.store.write_csv(f"beta_N{n}.csv", report.header(), report.csv_rows())
            reports.append(report)
            verdicts.extend(report.verdicts)
        verdicts.extend(beta_trend(reports))
        self.store.write_lines(
            "beta.txt",
            [
                f"N = {r.n_size} grid_sup_beta = {r.beta:.10g} se = {r.beta_se:.6g} "
                f"collar_inf = {r.collar_inf:.10g} bound = {r.bound:.10g}"
                for r in reports
            ],
        )
        return verdicts

    def _convergence(self) -> list[Verdict]:
        cfg = self.config
        assert cfg.n_values is not None
        invariant = invariant_reference(self.model, cfg.invariant)
        study = convergence_study(
            self.model,
            cfg.n_values,
            invariant,
            cfg.particles,
            cfg.horizon,
            cfg.dt,
            burn_in=cfg.burn_in,
            seed=self.seed,
            scheme=cfg.scheme,
            min_relative_margin=cfg.min_relative_margin,
        )
        self.store.write_csv("convergence.csv", study.trend.header(), study.trend.rows())
        return [study.trend.verdict]
