from __future__ import annotations

from pathlib import Path

from app.main import main


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.cfg"
    path.write_text(text, encoding="utf-8")
    return path


def test_check_experiment_reports_partial_hypotheses(tmp_path: Path) -> None:
    """check on logistic1d exits 0 and writes PARTIAL entries and the Lyapunov line."""
    config = _write(
        tmp_path, "experiment = check\nmodel = logistic1d\ninterior_margin = 0.05\nlyapunov_alpha_floor = 0.4\n",
    )
    out = tmp_path / "check"
    assert main([str(config), "--out", str(out)]) == 0
    report = (out / "hypotheses.txt").read_text(encoding="utf-8")
    assert "H3: PARTIAL" in report
    assert "LYAPUNOV x1: PASS" in report
    assert "CLAIM lyapunov_alpha x1: PASS" in (out / "verdicts.txt").read_text(encoding="utf-8")
    assert "experiment = check" in (out / "config.txt").read_text(encoding="utf-8")
    manifest = (out / "manifest.txt").read_text(encoding="utf-8")
    assert "version = 0.1.0" in manifest
    assert "exit_code = 0" in manifest


def test_scaling_on_boundary_attractor_is_refused(tmp_path: Path) -> None:
    """logistic1d has no interior attractor: exit 1."""
    config = _write(tmp_path, "experiment = scaling\nmodel = logistic1d\nn_values = 16, 32\nseed = 1\n")
    out = tmp_path / "scaling"
    assert main([str(config), "--out", str(out)]) == 1
    assert "refused" in (out / "manifest.txt").read_text(encoding="utf-8")


def test_invalid_config_exits_one(tmp_path: Path) -> None:
    """Config errors and missing files map to exit 1."""
    config = _write(tmp_path, "experiment = flow\ndt = -0.1\n")
    assert main([str(config), "--out", str(tmp_path / "bad")]) == 1
    assert main([str(tmp_path / "missing.cfg")]) == 1


def test_spectral_experiment_passes_residual_claim(tmp_path: Path) -> None:
    """spectral writes the density table and a PASS verdict."""
    config = _write(tmp_path, "experiment = spectral\ngrid_size = 1000\n")
    out = tmp_path / "spectral"
    assert main([str(config), "--out", str(out)]) == 0
    assert (out / "verdicts.txt").read_text(encoding="utf-8").startswith("CLAIM spectral_residual: PASS")
    assert (out / "spectral.csv").read_text(encoding="utf-8").startswith("x,g,h\n")


def test_simulation_outputs_are_reproducible(tmp_path: Path) -> None:
    """Same config and seed give identical CSV bytes for any worker count."""
    config = _write(
        tmp_path,
        "experiment = simulate\nmodel = logistic1d\nn_size = 5\nhorizon = 2\ndt = 0.01\ncount = 300\nseed = 13\n"
        "absorption_target = 0\n",
    )
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main([str(config), "--out", str(first), "--workers", "1"]) == 0
    assert main([str(config), "--out", str(second), "--workers", "2"]) == 0
    for name in ("paths.csv", "survival.csv", "path_0.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "paths.csv").read_text(encoding="utf-8").startswith("stream,tau,absorbed,DN\n")


def test_seed_flag_overrides_config(tmp_path: Path) -> None:
    """--seed supplies the seed; a short horizon misses the absorption target and exits 3."""
    config = _write(tmp_path, "experiment = simulate\nhorizon = 0.5\ndt = 0.05\ncount = 5\n")
    out = tmp_path / "seeded"
    assert main([str(config), "--out", str(out), "--seed", "4"]) == 3
    assert "seed = 4" in (out / "manifest.txt").read_text(encoding="utf-8")
    assert "CLAIM finite_time_absorption: FAIL" in (out / "verdicts.txt").read_text(encoding="utf-8")


def test_flow_experiment_with_probe(tmp_path: Path) -> None:
    """flow with a candidate writes the trajectory and convergence times."""
    config = _write(
        tmp_path,
        "experiment = flow\nmodel = hawk_dove\nhorizon = 5\ndt = 0.01\nx0 = 0.5, 0.5\n"
        "candidate = 0.6666666666666666, 0.3333333333333333\ngrid_resolution = 30\n",
    )
    out = tmp_path / "flow"
    assert main([str(config), "--out", str(out)]) == 0
    assert (out / "flow.csv").read_text(encoding="utf-8").startswith("t,x1,x2\n")
    assert "eps = 0.01" in (out / "attractor.txt").read_text(encoding="utf-8")


def test_qsd_experiment_with_pruning_estimator(tmp_path: Path) -> None:
    """estimator = pruning writes survivor samples and the spectral comparison."""
    config = _write(
        tmp_path,
        "experiment = qsd\nmodel = logistic1d\nestimator = pruning\nhorizon = 2\ndt = 0.01\n"
        "particles = 2000\ntheta_samples = 0\nseed = 5\n",
    )
    out = tmp_path / "pruning"
    assert main([str(config), "--out", str(out)]) in (0, 3)
    assert (out / "qsd_samples.csv").read_text(encoding="utf-8").startswith("x1,x2\n")
    assert "method=pruning" in (out / "qsd.txt").read_text(encoding="utf-8")
    assert "CLAIM spectral_agreement:" in (out / "verdicts.txt").read_text(encoding="utf-8")
    assert not (out / "taus.csv").exists()


def test_lln_experiment_writes_table(tmp_path: Path) -> None:
    """lln writes one row per (N, delta) and a verdict per row."""
    config = _write(
        tmp_path,
        "experiment = lln\nmodel = hawk_dove\nn_values = 10, 100\ndeltas = 0.1\nhorizon = 1\ndt = 0.01\n"
        "count = 50\nseed = 2\n",
    )
    out = tmp_path / "lln"
    assert main([str(config), "--out", str(out)]) in (0, 3)
    rows = (out / "lln.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("N,delta")
    assert len(rows) == 3
    assert "CLAIM" in (out / "verdicts.txt").read_text(encoding="utf-8")


def test_beta_experiment_writes_one_table_per_size(tmp_path: Path) -> None:
    """beta writes beta_N{n}.csv per size and a summary line each."""
    config = _write(
        tmp_path,
        "experiment = beta\nmodel = hawk_dove\nn_values = 4, 16\nparticles = 100\nhorizon = 2\ndt = 0.01\n"
        "grid_resolution = 5\ntrials = 10\nk_margin = 0.2\ndelta = 0.2\nseed = 3\n",
    )
    out = tmp_path / "beta"
    assert main([str(config), "--out", str(out)]) in (0, 3)
    for n in (4, 16):
        assert (out / f"beta_N{n}.csv").read_text(encoding="utf-8").startswith("set,x1,x2,probability,se\n")
    assert len((out / "beta.txt").read_text(encoding="utf-8").splitlines()) == 2


def test_convergence_experiment_writes_trend(tmp_path: Path) -> None:
    """convergence writes the distance ladder and the trend verdict."""
    config = _write(
        tmp_path,
        "experiment = convergence\nmodel = hawk_dove\nn_values = 2, 50\nparticles = 100\nhorizon = 5\n"
        "dt = 0.01\nseed = 6\n",
    )
    out = tmp_path / "convergence"
    assert main([str(config), "--out", str(out)]) in (0, 3)
    table = (out / "convergence.csv").read_text(encoding="utf-8").splitlines()
    assert table[0] == "label,distance,ci_low,ci_high,metric"
    assert len(table) == 3
    assert "CLAIM qsd_to_invariant_trend:" in (out / "verdicts.txt").read_text(encoding="utf-8")
