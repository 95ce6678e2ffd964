from __future__ import annotations

import pytest

from app.cli.parser import echo_config, parse_config
from app.utils.errors import ConfigError

QSD_TEXT = "experiment = qsd\nmodel = logistic1d\nn_size = 1\nparticles = 2000\nseed = 42\n"


def test_parse_valid_config_applies_defaults() -> None:
    """A minimal qsd config validates and gets the documented defaults."""
    config = parse_config(QSD_TEXT)
    assert config.experiment == "qsd"
    assert config.particles == 2000
    assert config.seed == 42
    assert config.dt == 1e-3
    assert config.scheme == "euler_clamp"


def test_bound_violation_reports_line() -> None:
    """dt = -0.1 on line 2 is rejected with the line number."""
    with pytest.raises(ConfigError) as excinfo:
        parse_config("experiment = flow\ndt = -0.1\n")
    assert excinfo.value.line == 2
    assert "dt" in str(excinfo.value)


def test_empty_file_needs_experiment() -> None:
    """An empty config names the missing experiment."""
    with pytest.raises(ConfigError, match="experiment required"):
        parse_config("")


def test_unknown_key_is_rejected() -> None:
    """Typos are errors, not silently ignored."""
    with pytest.raises(ConfigError) as excinfo:
        parse_config("experiment = flow\n# comment\nhorizn = 3\n")
    assert excinfo.value.line == 3


def test_duplicate_and_malformed_lines() -> None:
    """Repeated keys and lines without '=' are errors."""
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("experiment = flow\nexperiment = check\n")
    with pytest.raises(ConfigError):
        parse_config("experiment flow\n")


def test_claim_experiments_need_a_seed() -> None:
    """Verdict-bearing experiments refuse to run unseeded unless a seed is supplied."""
    with pytest.raises(ConfigError, match="seed required"):
        parse_config("experiment = lln\nn_values = 10, 100\ndeltas = 0.5\n")
    config = parse_config("experiment = lln\nn_values = 10, 100\ndeltas = 0.5\n", overrides={"seed": 7})
    assert config.seed == 7
    assert config.n_values == [10, 100]


def test_rates_table_and_points() -> None:
    """Point lists use ';' between points and ',' within a point."""
    config = parse_config("experiment = check\nmodel = rates\nrates = 0, 1; 0.5, 0\n")
    assert config.rates == [[0.0, 1.0], [0.5, 0.0]]
    with pytest.raises(ConfigError):
        parse_config("experiment = check\nrates = 0, 1; 0.5, 0\n")


def test_unknown_model_is_rejected() -> None:
    """Model names must be presets or 'rates'."""
    with pytest.raises(ConfigError, match="Unsupported model"):
        parse_config("experiment = check\nmodel = lotka\n")


def test_echo_round_trip() -> None:
    """parse(echo(parse(text))) equals parse(text)."""
    text = (
        "experiment = scaling\nmodel = hawk_dove\nseed = 3\nn_values = 16, 32, 64\n"
        "dt = 0.001\nhorizon = 12.5\ncandidate = 0.6666666666666666, 0.3333333333333333\n"
        "eps_list = 0.05, 0.01\n"
    )
    config = parse_config(text)
    assert parse_config(echo_config(config)) == config


def test_bound_violation_on_first_line() -> None:
    """A bad value on line 1 is reported on line 1, before the missing experiment."""
    with pytest.raises(ConfigError) as excinfo:
        parse_config("dt = -0.1\n")
    assert excinfo.value.line == 1
    assert "dt" in str(excinfo.value)


def test_estimator_choice() -> None:
    """pruning is accepted and refuses a killing margin."""
    config = parse_config(QSD_TEXT + "estimator = pruning\n")
    assert config.estimator == "pruning"
    assert parse_config(QSD_TEXT).estimator == "fleming_viot"
    with pytest.raises(ConfigError, match="killing_margin"):
        parse_config(QSD_TEXT + "estimator = pruning\nkilling_margin = 0.1\n")


def test_scaling_needs_theta_samples() -> None:
    """scaling with theta_samples = 0 cannot measure absorption times."""
    with pytest.raises(ConfigError, match="theta_samples"):
        parse_config("experiment = scaling\nmodel = hawk_dove\nn_values = 16, 32\nseed = 1\ntheta_samples = 0\n")
