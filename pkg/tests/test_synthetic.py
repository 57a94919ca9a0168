"""Test cases for the __synthetic__ module."""
import numpy as np
import pytest

from agesync.errors import ConfigError, DataError, SupportError
from agesync.io import ProxyRecord, ScaleKind
from agesync.synthetic import (
    SyntheticSpec,
    TrueChronology,
    add_noise,
    closed_form_t,
    downsample,
    local_linear_smooth,
    make_pseudo_targets,
    make_synthetic_record,
    make_target_ensemble,
    residual_sd,
    true_dt,
    true_t,
)


@pytest.fixture(name="chron")
def _chron() -> TrueChronology:
    """Default chronology."""
    return TrueChronology()


@pytest.fixture(name="targets", scope="module")
def _targets():
    """Default pseudo-targets."""
    return make_pseudo_targets(seed=0)


def test_true_dt(chron) -> None:
    """Tests deposition times at known depths."""
    assert true_dt(0.0, chron) == pytest.approx(20.0)
    assert true_dt(250.0, chron) == pytest.approx(42.8)
    assert np.all(true_dt(np.linspace(0, 1000, 101), chron) > 0)


def test_true_t(chron) -> None:
    """Tests the quadrature against the closed form."""
    assert true_t(0.0, chron) == pytest.approx(0.0)
    assert true_t(1000.0, chron) == pytest.approx(41600.0, rel=1e-9)
    depths = np.linspace(0.0, 1000.0, 41)
    np.testing.assert_allclose(true_t(depths, chron), closed_form_t(depths, chron), rtol=1e-9, atol=1e-8)
    step = 1e-3
    derivative = (closed_form_t(500.0 + step, chron) - closed_form_t(500.0 - step, chron)) / (2 * step)
    assert derivative == pytest.approx(true_dt(500.0, chron), rel=1e-6)


def test_true_t_outside(chron) -> None:
    """Tests depths outside the chronology."""
    with pytest.raises(SupportError):
        true_t(1001.0, chron)


def test_infeasible_chronology() -> None:
    """Tests that a negative deposition time is refused."""
    with pytest.raises(ConfigError, match="infeasible"):
        TrueChronology(a=-5.0)


def test_pseudo_targets(targets) -> None:
    """Tests determinism, span and distinctness of the two targets."""
    first, second = targets
    again, _ = make_pseudo_targets(seed=0)
    np.testing.assert_array_equal(first.values, again.values)
    assert first.scale_kind is ScaleKind.AGE
    assert first.span == (0.0, 45_000.0)
    assert len(first) == 2251
    assert abs(np.corrcoef(first.values, second.values)[0, 1]) < 0.5
    other, _ = make_pseudo_targets(seed=1)
    assert not np.array_equal(first.values, other.values)


def test_local_linear_smooth_reproduces_lines() -> None:
    """Tests that the smoother is exact on a straight line."""
    x = np.linspace(0.0, 10.0, 50)
    np.testing.assert_allclose(local_linear_smooth(x, 3.0 * x - 1.0), 3.0 * x - 1.0, atol=1e-8)
    assert residual_sd(x, 3.0 * x - 1.0) == pytest.approx(0.0, abs=1e-8)


def test_synthetic_record_clean(targets, chron) -> None:
    """Tests that zero noise and weight 1 reproduce the first target at the true ages."""
    record, ages = make_synthetic_record(targets, SyntheticSpec(weight=1.0, noise=0.0, n_points=200), chron)
    assert record.scale_kind is ScaleKind.DEPTH
    assert len(record) == 200
    np.testing.assert_allclose(ages, closed_form_t(record.positions, chron), rtol=1e-9, atol=1e-8)
    expected = np.interp(ages, targets[0].positions, targets[0].values)
    np.testing.assert_allclose(record.values, expected)


def test_synthetic_record_affine(targets, chron) -> None:
    """Tests the affine constants on a noiseless mixture."""
    spec = SyntheticSpec(weight=0.3, noise=0.0, c1=2.0, c2=-1.0, n_points=100)
    record, ages = make_synthetic_record(targets, spec, chron)
    clean = 0.3 * np.interp(ages, targets[0].positions, targets[0].values) + 0.7 * np.interp(
        ages, targets[1].positions, targets[1].values
    )
    np.testing.assert_allclose(record.values, 2.0 * clean - 1.0)


def test_synthetic_record_noise_level(targets, chron) -> None:
    """Tests that the added noise has the requested fraction of the residual sd."""
    spec = SyntheticSpec(noise=0.5, n_points=1000, seed=4)
    noisy, ages = make_synthetic_record(targets, spec, chron)
    clean, _ = make_synthetic_record(targets, SyntheticSpec(noise=0.0, n_points=1000), chron)
    expected = 0.5 * residual_sd(clean.positions, clean.values)
    assert np.std(noisy.values - clean.values, ddof=1) == pytest.approx(expected, rel=0.15)


def test_synthetic_record_short_targets(chron) -> None:
    """Tests that targets not covering the true ages are refused."""
    with pytest.raises(SupportError, match="target 1"):
        make_synthetic_record(make_pseudo_targets(length=30_000.0), SyntheticSpec(n_points=50), chron)


def test_downsample() -> None:
    """Tests kept counts and endpoints."""
    record = ProxyRecord(np.arange(100.0), np.arange(100.0) ** 2)
    half = downsample(record, 0.5)
    assert len(half) == 50
    assert half.positions[0] == 0.0 and half.positions[-1] == 99.0
    assert downsample(record, 1.0) is record
    assert len(downsample(record, 0.25)) == 25
    with pytest.raises(DataError):
        downsample(ProxyRecord(np.arange(10.0), np.zeros(10)), 0.3)
    with pytest.raises(ConfigError):
        downsample(record, 0.0)


def test_add_noise(rng) -> None:
    """Tests the noise scale and the zero-noise identity."""
    record = ProxyRecord(np.arange(5000.0), rng.normal(0.0, 2.0, 5000))
    assert add_noise(record, 0.0) is record
    noisy = add_noise(record, 0.5, seed=3)
    expected = 0.5 * np.std(record.values, ddof=1)
    assert np.std(noisy.values - record.values, ddof=1) == pytest.approx(expected, rel=0.05)
    np.testing.assert_array_equal(noisy.values, add_noise(record, 0.5, seed=3).values)
    with pytest.raises(ConfigError):
        add_noise(record, -0.1)


def test_make_target_ensemble(target_record) -> None:
    """Tests that draws are monotone and centred on the target's ages."""
    ensemble = make_target_ensemble(target_record, 400, seed=2)
    assert ensemble.n_draws == 400
    assert np.all(np.diff(ensemble.draws, axis=0) > 0)
    np.testing.assert_array_equal(ensemble.draws[0], target_record.positions[0])
    assert np.mean(ensemble.draws[-1]) == pytest.approx(target_record.positions[-1], rel=0.02)
    spread = ensemble.draws.std(axis=1)
    assert spread[-1] > spread[10]
    with pytest.raises(ConfigError):
        make_target_ensemble(target_record, 0)
