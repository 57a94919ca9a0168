"""Test cases for the __start__ module."""
import math

import numpy as np
import pytest

from agesync import start
from agesync.config import load_config, with_overrides
from agesync.errors import InitializationError
from agesync.io import read_truth
from agesync.pipeline import prepare, simulate
from agesync.sampler import init_points
from agesync.start import aligned_guess, aligned_start, banded_dtw, increments_from_rates, start_points
from agesync.warp import rates_from_increments

TRUE_AGES = 50.0 + 8.0 * np.linspace(0.0, 100.0, 60)


def test_banded_dtw() -> None:
    """Tests that the path follows the only zero-cost alignment."""
    rows = 3.0 + 2.0 * np.arange(6)
    cost = np.abs(rows[:, np.newaxis] - np.arange(20.0)[np.newaxis, :])
    steps = [np.array([1, 2, 3])] * 6
    np.testing.assert_array_equal(banded_dtw(cost, steps, [np.zeros(3)] * 6), [3, 5, 7, 9, 11, 13])


def test_banded_dtw_penalties() -> None:
    """Tests that step penalties decide between paths of equal cost."""
    columns = banded_dtw(np.zeros((4, 10)), [np.array([1, 2])] * 4, [np.array([1.0, 0.0])] * 4)
    assert np.all(np.diff(columns) == 2)


def test_banded_dtw_does_not_fit() -> None:
    """Tests an input whose smallest steps overrun the target."""
    with pytest.raises(InitializationError, match="does not fit"):
        banded_dtw(np.zeros((5, 6)), [np.array([2])] * 5, [np.zeros(1)] * 5)


def test_increments_from_rates(rng) -> None:
    """Tests that the increments reproduce the rates through the memory recursion."""
    rates = rng.uniform(1.0, 2.0, 8)
    np.testing.assert_allclose(rates_from_increments(increments_from_rates(rates, 0.3), 0.3), rates, rtol=1e-12)
    np.testing.assert_allclose(increments_from_rates(rates, 0.0), rates)


def test_aligned_guess(single_model) -> None:
    """Tests that the DTW guess follows the linear chronology of the fixture."""
    theta = aligned_guess(single_model)
    assert theta.size == single_model.layout.size
    ages = single_model.warp(theta)
    assert ages is not None
    assert np.median(np.abs(ages - TRUE_AGES)) < 25.0


def test_aligned_start(single_model, rng) -> None:
    """Tests the polished start and its jittered partner."""
    x, xp = aligned_start(single_model, rng)
    assert single_model.energy(x) <= single_model.energy(aligned_guess(single_model))
    assert math.isfinite(single_model.energy(xp))
    assert np.all(x != xp)
    assert np.median(np.abs(single_model.warp(x) - TRUE_AGES)) < 25.0


def test_start_points_from_prior(single_model) -> None:
    """Tests that switching the aligned start off gives plain prior draws."""
    x, xp = start_points(single_model, np.random.default_rng(3), aligned=False)
    y, yp = init_points(single_model.draw_initial, single_model.energy, np.random.default_rng(3))
    np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(xp, yp)


def test_start_points_fall_back(single_model, rng, monkeypatch, caplog) -> None:
    """Tests the fallback to prior draws when no aligned start can be built."""

    def refuse(model):
        raise InitializationError("no aligned start")

    monkeypatch.setattr(start, "aligned_guess", refuse)
    x, xp = start_points(single_model, rng)
    assert math.isfinite(single_model.energy(x)) and math.isfinite(single_model.energy(xp))
    assert np.all(x != xp)
    assert "starting from prior draws" in caplog.text


def test_aligned_start_on_synthetic_record(tmp_path) -> None:
    """Tests that a desk-scale synthetic record starts close to its true chronology."""
    config = load_config(preset="desk", overrides=["synthetic.n_points=200"])
    simulate(config, tmp_path)
    config = with_overrides(config, data__input=tmp_path / "input.csv", data__target=tmp_path / "target1.csv")
    prepared = prepare(config)
    x, _ = aligned_start(prepared.model, np.random.default_rng(0))
    _, truth = read_truth(tmp_path / "truth.csv")
    ages = prepared.model.ages_at(x, prepared.record.positions)
    assert np.mean(np.abs(ages - truth)) < 1000.0
