"""Quantile rescaling, target interpolation and two-target mixing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Final, Tuple, Union

import numpy as np

from .errors import DegenerateDataError, SupportError
from .io import ProxyRecord

ArrayLike = Union[float, np.ndarray]

DEFAULT_QUANTILES: Final[Tuple[float, float]] = (0.05, 0.95)


@dataclass(frozen=True)
class RescaleMap:
    """Affine map sending ``x_l`` to -1 and ``x_u`` to +1."""

    x_l: float
    x_u: float

    def __post_init__(self) -> None:
        if not self.x_l < self.x_u:
            raise DegenerateDataError(
                f"rescale map needs x_l < x_u, got {self.x_l} and {self.x_u}"
            )

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return apply_rescale(x, self)


def fit_rescale(values, q_l: float = DEFAULT_QUANTILES[0], q_u: float = DEFAULT_QUANTILES[1]) -> RescaleMap:
    """Empirical ``q_l``/``q_u`` quantiles (linear interpolation between order statistics)."""
    data = np.asarray(values, dtype=float)
    x_l, x_u = np.quantile(data, [q_l, q_u], method="linear")
    if not x_l < x_u:
        raise DegenerateDataError(
            f"the {q_l} and {q_u} quantiles coincide ({x_l}); cannot rescale constant data"
        )
    return RescaleMap(float(x_l), float(x_u))


def apply_rescale(x: ArrayLike, rescale: RescaleMap) -> ArrayLike:
    """x' = 2 (x - x_l) / (x_u - x_l) - 1, without clipping."""
    return 2.0 * (np.asarray(x, dtype=float) - rescale.x_l) / (rescale.x_u - rescale.x_l) - 1.0


def rescale_record(record: ProxyRecord, q_l: float, q_u: float) -> ProxyRecord:
    """Returns the record with its values rescaled by its own quantiles."""
    return record.with_values(apply_rescale(record.values, fit_rescale(record.values, q_l, q_u)))


def interp_target(target: ProxyRecord, age: ArrayLike) -> ArrayLike:
    """Piecewise-linear target value at ``age``; raises outside the target range."""
    ages = np.asarray(age, dtype=float)
    low, high = target.span
    if np.any(ages < low) or np.any(ages > high):
        raise SupportError(f"age outside the target range [{low}, {high}]")
    result = np.interp(ages, target.positions, target.values)
    return float(result) if result.ndim == 0 else result


def mix_targets(v1: ArrayLike, v2: ArrayLike, w: float) -> ArrayLike:
    """Convex combination w * v1 + (1 - w) * v2."""
    return w * np.asarray(v1, dtype=float) + (1.0 - w) * np.asarray(v2, dtype=float)


@dataclass(frozen=True)
class MixedTargets:
    """Two targets interpolated onto the union of their ages over the common range.

    Mixing happens on raw values; the mixed series is rescaled afterwards with
    a map refitted for every mixing weight.
    """

    ages: np.ndarray
    first: np.ndarray
    second: np.ndarray
    q_l: float
    q_u: float

    @classmethod
    def from_records(
        cls, first: ProxyRecord, second: ProxyRecord, q_l: float, q_u: float
    ) -> "MixedTargets":
        """Caches both raw targets on their union age grid."""
        low = max(first.span[0], second.span[0])
        high = min(first.span[1], second.span[1])
        if not low < high:
            raise SupportError("the two targets do not overlap in age")
        ages = np.union1d(first.positions, second.positions)
        ages = ages[(ages >= low) & (ages <= high)]
        ages = np.union1d(ages, [low, high])
        return cls(
            ages=ages,
            first=np.interp(ages, first.positions, first.values),
            second=np.interp(ages, second.positions, second.values),
            q_l=q_l,
            q_u=q_u,
        )

    @property
    def age_range(self) -> Tuple[float, float]:
        """Common age range of the two targets."""
        return float(self.ages[0]), float(self.ages[-1])

    def rescale_map(self, w: float) -> RescaleMap:
        """Rescale map of the mixed series for weight ``w``."""
        return fit_rescale(mix_targets(self.first, self.second, w), self.q_l, self.q_u)

    def mixed(self, w: float) -> np.ndarray:
        """Rescaled mixed target on ``ages``."""
        raw = mix_targets(self.first, self.second, w)
        return apply_rescale(raw, fit_rescale(raw, self.q_l, self.q_u))

    def components_at(self, ages: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Raw values of both targets at arbitrary ages inside the common range."""
        return (
            np.interp(ages, self.ages, self.first),
            np.interp(ages, self.ages, self.second),
        )
