"""Test cases for the __config__ module."""
from pathlib import Path

import pytest

from agesync.config import (
    Configuration,
    Mode,
    RunConfig,
    Strategy,
    load_config,
    with_overrides,
)
from agesync.errors import ConfigError


def test_defaults() -> None:
    """Tests the defaults and the parameter count per strategy."""
    config = load_config()
    assert config == RunConfig()
    assert config.mode is Mode.AGE_DEPTH
    assert config.n_params == 53
    assert with_overrides(config, strategy=Strategy.DOUBLE).n_params == 54
    assert with_overrides(config, strategy=Strategy.UQ).n_params == 52


def test_load_config_file(write_csv) -> None:
    """Tests reading an INI file with typed values."""
    path = write_csv(
        "run.ini",
        "[run]\nmode = Age-To-Age\nstrategy = double\nsections = 12\n"
        "[data]\ninput = in.csv\ntarget = t1.csv\ntarget2 = t2.csv\ninput_columns = 1, 3\n"
        "[mcmc]\nburn_in = 40\nprogress = yes\naligned_start = no\n"
        "[synthetic]\ngrid_noise = 0.1, 0.2\n",
    )
    config = load_config(path)
    assert config.mode is Mode.AGE_TO_AGE
    assert config.strategy is Strategy.DOUBLE
    assert config.sections == 12
    assert config.data.input == Path("in.csv")
    assert config.data.input_columns == (1, 3)
    assert config.mcmc.burn_in == 40
    assert config.mcmc.progress is True
    assert config.mcmc.aligned_start is False
    assert config.synthetic.grid_noise == (0.1, 0.2)
    config.require_inputs()


def test_presets_and_overrides() -> None:
    """Tests that overrides apply after the preset."""
    desk = load_config(preset="desk")
    assert (desk.sections, desk.mcmc.n_samples, desk.mcmc.thinning) == (20, 500, 2)
    config = load_config(preset="full", overrides=["mcmc.thinning=3", "priors.tau0_sd=none"])
    assert config.mcmc.thinning == 3
    assert config.mcmc.n_samples == 3000
    assert config.priors.tau0_sd is None


@pytest.mark.parametrize(
    "overrides, message",
    [
        (["nosection.key=1"], "unknown config sections"),
        (["mcmc.chains=4"], "unknown keys"),
        (["mcmc.thinning"], "section.key=value"),
        (["mcmc.thinning=two"], "cannot interpret"),
        (["run.sections=1"], "sections"),
        (["rescale.q_lower=0.9", "rescale.q_upper=0.1"], "quantiles"),
        (["priors.taun_mean=100"], "together"),
        (["data.input_columns=1,1"], "distinct"),
    ],
)
def test_invalid_config(overrides, message: str) -> None:
    """Tests refused configurations."""
    with pytest.raises(ConfigError, match=message):
        load_config(overrides=overrides)


def test_unknown_preset_and_missing_file(tmp_path) -> None:
    """Tests an unknown preset and a missing file."""
    with pytest.raises(ConfigError, match="preset"):
        load_config(preset="huge")
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.ini")


def test_require_inputs() -> None:
    """Tests the files each strategy needs."""
    with pytest.raises(ConfigError, match="data.input"):
        RunConfig().require_inputs()
    double = load_config(overrides=["run.strategy=double", "data.input=a", "data.target=b"])
    with pytest.raises(ConfigError, match="target2"):
        double.require_inputs()
    uq = load_config(overrides=["run.strategy=uq", "data.input=a", "data.target=b"])
    with pytest.raises(ConfigError, match="ensemble"):
        uq.require_inputs()


def test_to_ini_round_trip(tmp_path) -> None:
    """Tests that the config echo loads back into an equal config."""
    config = load_config(
        preset="desk",
        overrides=["run.seed=9", "run.name=core a", "data.input=x.csv", "priors.tau0_mean=120.5"],
    )
    path = tmp_path / "echo.ini"
    path.write_text(config.to_ini(), encoding="utf-8")
    assert load_config(path) == config


def test_with_overrides() -> None:
    """Tests nested and top-level replacement."""
    config = with_overrides(RunConfig(), seed=3, mcmc__n_samples=10, output__write_ensemble=True)
    assert config.seed == 3
    assert config.mcmc.n_samples == 10
    assert config.output.write_ensemble is True
    with pytest.raises(ConfigError):
        with_overrides(config, mcmc__thinning=0)


def test_configuration_home(home) -> None:
    """Tests the AGESYNC_HOME override of the application directories."""
    configuration = Configuration()
    assert configuration.dir_base_data == home
    assert configuration.dir_base_logs == home / "logs"
    explicit = Configuration(dir_home=home / "other")
    assert explicit.dir_base_logs == home / "other" / "logs"


def test_configuration_platformdirs(monkeypatch) -> None:
    """Tests the platform defaults when no home is set."""
    monkeypatch.delenv("AGESYNC_HOME")
    configuration = Configuration()
    assert "agesync" in str(configuration.dir_base_data)
    assert "agesync" in str(configuration.dir_base_logs)
