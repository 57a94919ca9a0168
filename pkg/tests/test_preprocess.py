"""Test cases for the __preprocess__ module."""
import numpy as np
import pytest

from agesync.errors import DegenerateDataError, SupportError
from agesync.io import ProxyRecord, ScaleKind
from agesync.preprocess import (
    MixedTargets,
    RescaleMap,
    apply_rescale,
    fit_rescale,
    interp_target,
    mix_targets,
    rescale_record,
)


@pytest.mark.parametrize("q_l, q_u, expected", [(0.0, 1.0, (0.0, 100.0)), (0.1, 0.9, (10.0, 90.0))])
def test_fit_rescale(q_l: float, q_u: float, expected) -> None:
    """Tests quantile endpoints on a uniform grid."""
    rescale = fit_rescale(np.arange(101.0), q_l, q_u)
    assert (rescale.x_l, rescale.x_u) == pytest.approx(expected, rel=1e-12)


def test_fit_rescale_constant() -> None:
    """Tests that constant data cannot be rescaled."""
    with pytest.raises(DegenerateDataError):
        fit_rescale(np.full(20, 3.0))


def test_apply_rescale() -> None:
    """Tests the endpoints, the midpoint and an interior value."""
    rescale = RescaleMap(10.0, 90.0)
    assert apply_rescale(10.0, rescale) == pytest.approx(-1.0)
    assert apply_rescale(50.0, rescale) == pytest.approx(0.0)
    assert apply_rescale(30.0, rescale) == pytest.approx(-0.5, rel=1e-12)
    assert rescale(90.0) == pytest.approx(1.0)


def test_rescale_preserves_order_without_clipping() -> None:
    """Tests that rescaling is affine and increasing, with values outside [-1, 1] kept."""
    record = ProxyRecord(np.arange(101.0), np.arange(101.0) ** 2)
    rescaled = rescale_record(record, 0.05, 0.95)
    assert np.all(np.diff(rescaled.values) > 0)
    assert rescaled.values.min() < -1.0
    assert rescaled.values.max() > 1.0
    np.testing.assert_array_equal(rescaled.positions, record.positions)


def test_interp_target() -> None:
    """Tests piecewise-linear interpolation and its range check."""
    target = ProxyRecord(np.array([0.0, 10.0, 20.0, 30.0]), np.array([0.0, 1.0, 0.0, 2.0]), ScaleKind.AGE)
    assert interp_target(target, 10.0) == pytest.approx(1.0)
    assert interp_target(target, 5.0) == pytest.approx(0.5)
    assert interp_target(target, 15.0) == pytest.approx(0.5, rel=1e-12)
    np.testing.assert_allclose(interp_target(target, np.array([0.0, 25.0])), [0.0, 1.0])
    with pytest.raises(SupportError):
        interp_target(target, 30.5)


@pytest.mark.parametrize(
    "v1, v2, w, expected", [(0.3, 5.0, 1.0, 0.3), (1.0, -1.0, 0.5, 0.0), (0.2, -0.4, 0.7, 0.02)]
)
def test_mix_targets(v1: float, v2: float, w: float, expected: float) -> None:
    """Tests the convex mixture."""
    assert mix_targets(v1, v2, w) == pytest.approx(expected, rel=1e-9, abs=1e-15)


def test_mixed_targets_union_grid() -> None:
    """Tests caching both targets on the union of their ages over the overlap."""
    first = ProxyRecord(np.array([0.0, 10.0, 20.0, 30.0]), np.array([0.0, 1.0, 2.0, 3.0]), ScaleKind.AGE)
    second = ProxyRecord(np.array([5.0, 15.0, 25.0, 35.0]), np.array([1.0, 1.0, 3.0, 3.0]), ScaleKind.AGE)
    mixed = MixedTargets.from_records(first, second, 0.05, 0.95)
    np.testing.assert_array_equal(mixed.ages, [5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    assert mixed.age_range == (5.0, 30.0)
    np.testing.assert_allclose(mixed.first, [0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    first_at, second_at = mixed.components_at(np.array([12.5]))
    assert first_at[0] == pytest.approx(1.25)
    assert second_at[0] == pytest.approx(1.0)


def test_mixed_targets_rescale_after_mixing() -> None:
    """Tests that the mixture is rescaled with a map refitted per weight."""
    ages = np.linspace(0.0, 100.0, 101)
    first = ProxyRecord(ages, ages, ScaleKind.AGE)
    second = ProxyRecord(ages, 10.0 * np.sin(ages / 7.0), ScaleKind.AGE)
    mixed = MixedTargets.from_records(first, second, 0.05, 0.95)
    for w in (0.0, 0.3, 1.0):
        values = mixed.mixed(w)
        assert np.quantile(values, 0.05) == pytest.approx(-1.0)
        assert np.quantile(values, 0.95) == pytest.approx(1.0)
    np.testing.assert_allclose(mixed.mixed(1.0), rescale_record(first, 0.05, 0.95).values)


def test_mixed_targets_no_overlap() -> None:
    """Tests disjoint targets."""
    first = ProxyRecord(np.arange(4.0), np.arange(4.0), ScaleKind.AGE)
    second = ProxyRecord(np.arange(10.0, 14.0), np.arange(4.0), ScaleKind.AGE)
    with pytest.raises(SupportError):
        MixedTargets.from_records(first, second, 0.05, 0.95)
