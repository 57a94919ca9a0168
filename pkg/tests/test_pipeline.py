"""Test cases for the __pipeline__ module."""
import numpy as np
import pandas as pd
import pytest
from scipy.signal import lfilter

from agesync.config import load_config
from agesync.errors import DataError, EnsembleError, RecordError
from agesync.io import read_ages, read_chain, read_diagnostics, write_ensemble, write_truth
from agesync.pipeline import (
    align,
    align_grid,
    cell_name,
    diagnose,
    evaluate,
    evaluate_grid,
    prepare,
    simulate,
    simulate_grid,
)
from agesync.synthetic import make_target_ensemble

QUICK = ("run.sections=5", "mcmc.n_samples=100", "mcmc.burn_in=500")


@pytest.fixture(name="quick_config")
def _quick_config(small_fixture):
    """Single-target config with a small sampler budget on the small fixture."""
    input_path, target_path, _ = small_fixture
    return load_config(overrides=[*QUICK, f"data.input={input_path}", f"data.target={target_path}"])


def test_prepare(quick_config) -> None:
    """Tests that preparing loads and rescales without sampling."""
    prepared = prepare(quick_config)
    assert len(prepared.record) == 60
    assert prepared.model.grid.K == 5
    assert prepared.model.layout.size == 8
    assert prepared.model.target_range == (0.0, 1000.0)


def test_align_single(quick_config, tmp_path, small_fixture) -> None:
    """Tests the files written by a single-target alignment."""
    result = align(quick_config, tmp_path / "out")
    out = tmp_path / "out"
    assert result.ages.shape == (60, 100)
    assert np.all(np.diff(result.ages, axis=0) > 0)
    chain = read_chain(out / "chain.csv")
    assert list(chain.columns)[:2] == ["tau0", "alpha_1"]
    assert list(chain.columns)[-3:] == ["omega", "sigma", "log_objective"]
    assert len(chain) == 100
    ages = read_ages(out / "ages.csv")
    np.testing.assert_allclose(ages["position"], np.linspace(0.0, 100.0, 60))
    assert np.all(ages["lower95"] <= ages["median"]) and np.all(ages["median"] <= ages["upper95"])
    assert np.all((ages["median"] >= 0.0) & (ages["median"] <= 1000.0))
    diagnostics = read_diagnostics(out / "diagnostics.csv")
    assert diagnostics["n_params"] == 8
    assert 0 < diagnostics["acceptance_rate"] <= 1
    assert load_config(out / "config.ini") == quick_config


def test_align_is_reproducible(quick_config, tmp_path) -> None:
    """Tests that the same seed gives the same chain file."""
    align(quick_config, tmp_path / "a")
    align(quick_config, tmp_path / "b")
    assert (tmp_path / "a" / "chain.csv").read_bytes() == (tmp_path / "b" / "chain.csv").read_bytes()


def test_align_double(small_fixture, target_record, tmp_path) -> None:
    """Tests that the mixing weight is sampled and reported."""
    input_path, target_path, _ = small_fixture
    second = tmp_path / "target2.csv"
    pd.DataFrame({"age": target_record.positions, "proxy": np.cos(target_record.positions / 60.0)}).to_csv(
        second, index=False
    )
    config = load_config(
        overrides=[
            *QUICK,
            "run.strategy=double",
            f"data.input={input_path}",
            f"data.target={target_path}",
            f"data.target2={second}",
        ]
    )
    result = align(config, tmp_path / "out")
    assert result.chain.names[-1] == "mix"
    mix = result.chain.column("mix")
    assert np.all((mix >= 0) & (mix <= 1))
    assert "mix_mean" in read_diagnostics(tmp_path / "out" / "diagnostics.csv")


def test_align_uq(small_fixture, target_record, tmp_path) -> None:
    """Tests an alignment against a target age ensemble."""
    input_path, _, _ = small_fixture
    ensemble_path = tmp_path / "ensemble.csv"
    write_ensemble(make_target_ensemble(target_record, 120, seed=5), ensemble_path)
    config = load_config(
        overrides=[*QUICK, "run.strategy=uq", f"data.input={input_path}", f"data.ensemble={ensemble_path}"]
    )
    result = align(config, tmp_path / "out")
    assert "sigma" not in result.chain.names
    assert result.chain.samples.shape == (100, 7)


def test_align_small_ensemble(small_fixture, target_record, tmp_path) -> None:
    """Tests that an ensemble with too few draws is refused before sampling."""
    input_path, _, _ = small_fixture
    ensemble_path = tmp_path / "ensemble.csv"
    write_ensemble(make_target_ensemble(target_record, 50, seed=5), ensemble_path)
    config = load_config(overrides=["run.strategy=uq", f"data.input={input_path}", f"data.ensemble={ensemble_path}"])
    with pytest.raises(EnsembleError):
        prepare(config)


def test_age_model_missing(quick_config, tmp_path) -> None:
    """Tests that a configured but missing prior age model is an error."""
    config = load_config(
        overrides=[
            *QUICK,
            f"data.input={quick_config.data.input}",
            f"data.target={quick_config.data.target}",
            f"data.age_model={tmp_path / 'none.csv'}",
        ]
    )
    with pytest.raises(DataError, match="not found"):
        prepare(config)


def test_simulate(tmp_path) -> None:
    """Tests the fixture files and their reproducibility."""
    config = load_config(overrides=["synthetic.n_points=200", "synthetic.ensemble_draws=110"])
    first = simulate(config, tmp_path / "a")
    second = simulate(config, tmp_path / "b")
    for name in ("input.csv", "truth.csv", "target1.csv", "target2.csv", "target_ensemble.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    truth = pd.read_csv(first.truth)
    assert len(truth) == 200
    assert truth["age"].iloc[-1] == pytest.approx(41600.0)
    assert second.ensemble is not None


def test_simulate_grid(tmp_path) -> None:
    """Tests one fixture per (noise, fraction) cell."""
    config = load_config(
        overrides=["synthetic.n_points=100", "synthetic.grid_noise=0.1, 0.5", "synthetic.grid_fraction=1.0, 0.5"]
    )
    cells = simulate_grid(config, tmp_path)
    assert len(cells) == 4
    assert sorted(cells["n_points"]) == [50, 50, 100, 100]
    assert cell_name(0.05, 0.5) == "noise-0-05-fraction-0-5"
    for name in cells["cell"]:
        assert len(pd.read_csv(tmp_path / name / "input.csv")) == len(pd.read_csv(tmp_path / name / "truth.csv"))
    assert (tmp_path / "cells.csv").is_file()


def test_grid_round_trip(tmp_path) -> None:
    """Tests simulating, aligning and scoring a small grid."""
    config = load_config(
        overrides=[
            *QUICK,
            "synthetic.n_points=60",
            "synthetic.grid_noise=0.1",
            "synthetic.grid_fraction=1.0, 0.5",
        ]
    )
    simulate_grid(config, tmp_path)
    outputs = align_grid(config, tmp_path)
    assert [path.name for path in outputs] == ["alignment", "alignment"]
    heatmap = evaluate_grid(tmp_path)
    assert len(heatmap) == 2 * 4
    assert set(heatmap["metric"]) == {"coverage", "mean_abs_error", "mean_interval_width", "mean_abs_delta_t_sd"}
    assert (tmp_path / "heatmap.csv").is_file()


def test_align_grid_without_cells(tmp_path) -> None:
    """Tests aligning a directory that is not a simulated grid."""
    with pytest.raises(DataError, match="simulate --grid"):
        align_grid(load_config(), tmp_path)


def _ages_file(path, positions, truth) -> None:
    pd.DataFrame(
        {
            "position": positions,
            "median": truth + 1.0,
            "lower95": truth - 2.0,
            "upper95": truth + 2.0,
            "mean": truth + 1.0,
            "sd": np.full(positions.size, 0.5),
        }
    ).to_csv(path, index=False)


def test_evaluate(tmp_path) -> None:
    """Tests the scorecard of a hand-made ages file."""
    positions = np.arange(5.0)
    truth = 10.0 * positions + 3.0
    _ages_file(tmp_path / "ages.csv", positions, truth)
    write_truth(positions, truth, tmp_path / "truth.csv")
    card = evaluate(tmp_path / "ages.csv", tmp_path / "truth.csv", tmp_path / "score")
    assert card.coverage == 1.0
    assert card.mean_abs_error == pytest.approx(1.0)
    assert card.mean_interval_width == pytest.approx(4.0)
    np.testing.assert_allclose(card.delta_t_sd, 2.0)
    scorecard = pd.read_csv(tmp_path / "score" / "scorecard.csv")
    assert list(scorecard["metric"]) == ["coverage", "mean_abs_error", "mean_interval_width", "mean_abs_delta_t_sd"]
    assert len(pd.read_csv(tmp_path / "score" / "delta_t.csv")) == 5


def test_evaluate_mismatched_positions(tmp_path) -> None:
    """Tests that ages and truth must share positions."""
    positions = np.arange(5.0)
    _ages_file(tmp_path / "ages.csv", positions, positions)
    write_truth(positions + 0.5, positions, tmp_path / "truth.csv")
    with pytest.raises(RecordError, match="do not match"):
        evaluate(tmp_path / "ages.csv", tmp_path / "truth.csv")


def test_evaluate_bad_ages_file(tmp_path) -> None:
    """Tests a missing ages file and one without a position column."""
    write_truth(np.arange(5.0), np.arange(5.0), tmp_path / "truth.csv")
    with pytest.raises(RecordError, match="not found"):
        evaluate(tmp_path / "ages.csv", tmp_path / "truth.csv")
    pd.DataFrame({"median": np.arange(5.0)}).to_csv(tmp_path / "ages.csv", index=False)
    with pytest.raises(RecordError, match="position"):
        evaluate(tmp_path / "ages.csv", tmp_path / "truth.csv")


def test_diagnose(tmp_path, rng, caplog) -> None:
    """Tests the pass and warn verdicts."""
    pd.DataFrame({"tau0": rng.normal(size=2000), "log_objective": rng.normal(size=2000)}).to_csv(
        tmp_path / "chain.csv", index=False
    )
    pd.DataFrame({"metric": ["acceptance_rate"], "value": [0.3]}).to_csv(tmp_path / "diagnostics.csv", index=False)
    report = diagnose(tmp_path / "chain.csv")
    assert report["iat_pass"] == 1.0
    assert report["acceptance_rate"] == pytest.approx(0.3)
    assert report["ess"] == pytest.approx(2000 / report["iat"])

    sticky = lfilter([1.0], [1.0, -0.995], rng.normal(size=20_000))
    pd.DataFrame({"log_objective": sticky}).to_csv(tmp_path / "sticky.csv", index=False)
    report = diagnose(tmp_path / "sticky.csv")
    assert report["iat_pass"] == 0.0
    assert np.isnan(report["acceptance_rate"])
    assert "consider more thinning" in caplog.text


def test_diagnose_errors(tmp_path) -> None:
    """Tests missing files and columns."""
    with pytest.raises(DataError, match="not found"):
        diagnose(tmp_path / "chain.csv")
    pd.DataFrame({"tau0": np.zeros(200)}).to_csv(tmp_path / "chain.csv", index=False)
    with pytest.raises(DataError, match="log_objective"):
        diagnose(tmp_path / "chain.csv")
