"""Fixtures for agesync"""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from agesync.config import Mode, PriorOptions, Strategy
from agesync.io import ProxyRecord, ScaleKind
from agesync.model import AlignmentModel, PriorSpec, elicit_alpha_means
from agesync.preprocess import rescale_record
from agesync.warp import make_grid


def pytest_addoption(parser) -> None:
    """Adds --runslow for the long acceptance runs."""
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items) -> None:
    """Skips tests marked slow unless --runslow is given."""
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(name="home", autouse=True)
def _home(tmp_path, monkeypatch) -> Path:
    """Points the application data root at a temporary directory."""
    home = tmp_path / "home"
    monkeypatch.setenv("AGESYNC_HOME", str(home))
    return home


@pytest.fixture(name="rng")
def _rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture(name="target_record")
def _target_record() -> ProxyRecord:
    """Age-indexed target on [0, 1000] with a smooth, non-periodic signal."""
    ages = np.linspace(0.0, 1000.0, 201)
    return ProxyRecord(ages, np.sin(ages / 80.0) + 0.3 * np.cos(ages / 23.0), ScaleKind.AGE)


@pytest.fixture(name="write_csv")
def _write_csv(tmp_path):
    """Writes rows to a CSV file under tmp_path and returns its path."""

    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture(name="small_fixture")
def _small_fixture(tmp_path, target_record):
    """Input record and target file where the input is the target sampled on a linear age-depth."""
    depths = np.linspace(0.0, 100.0, 60)
    true_ages = 50.0 + 8.0 * depths
    values = np.interp(true_ages, target_record.positions, target_record.values)
    input_path = tmp_path / "input.csv"
    target_path = tmp_path / "target.csv"
    pd.DataFrame({"depth": depths, "proxy": values}).to_csv(input_path, index=False)
    pd.DataFrame({"age": target_record.positions, "proxy": target_record.values}).to_csv(
        target_path, index=False
    )
    return input_path, target_path, true_ages


@pytest.fixture(name="single_model")
def _single_model(target_record) -> AlignmentModel:
    """Single-target model whose input is the target sampled at ages 50 + 8 * depth."""
    depths = np.linspace(0.0, 100.0, 60)
    values = np.interp(50.0 + 8.0 * depths, target_record.positions, target_record.values)
    record = rescale_record(ProxyRecord(depths, values), 0.05, 0.95)
    grid = make_grid(depths, 5)
    means = elicit_alpha_means(None, grid, Mode.AGE_DEPTH, (0.0, 1000.0))
    return AlignmentModel(
        mode=Mode.AGE_DEPTH,
        strategy=Strategy.SINGLE,
        grid=grid,
        positions=record.positions,
        input_values=record.values,
        priors=PriorSpec.from_options(PriorOptions(), means, (0.0, 1000.0), Mode.AGE_DEPTH, 0.0),
        target=rescale_record(target_record, 0.05, 0.95),
    )
