"""The monotone link function: equal sections, rate recursion, evaluation and support."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Final, Tuple, Union

import numpy as np
from scipy.signal import lfilter

from .config import Mode
from .errors import ConfigError, SupportError
from .io import ProxyRecord

RATE_BOUNDS: Final[Tuple[float, float]] = (0.25, 4.0)


@dataclass(frozen=True)
class SectionGrid:
    """K equal sections of length ``delta_c`` starting at ``c0``."""

    c0: float
    delta_c: float
    K: int

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ConfigError(f"need at least 2 sections, got {self.K}")
        if not self.delta_c > 0:
            raise ConfigError(f"section length must be positive, got {self.delta_c}")

    @property
    def knots(self) -> np.ndarray:
        """c_0 ... c_K."""
        knots = self.c0 + self.delta_c * np.arange(self.K + 1)
        knots[-1] = self.c_K
        return knots

    @property
    def c_K(self) -> float:
        """Bottom of the last section."""
        return self.c0 + self.K * self.delta_c


@dataclass(frozen=True)
class WarpParams:
    """Age of the top, section increments and memory."""

    tau0: float
    alpha: np.ndarray
    omega: float

    @property
    def rates(self) -> np.ndarray:
        """Section rates m derived from the increments."""
        return rates_from_increments(self.alpha, self.omega)


def make_grid(positions, K: int) -> SectionGrid:
    """Splits [min, max] of the input positions into K equal sections."""
    if K < 2:
        raise ConfigError(f"need at least 2 sections, got {K}")
    values = np.asarray(positions, dtype=float)
    low, high = float(values.min()), float(values.max())
    return SectionGrid(c0=low, delta_c=(high - low) / K, K=K)


def rates_from_increments(alpha, omega: float) -> np.ndarray:
    """m_K = alpha_K, then m_j = omega * m_{j+1} + (1 - omega) * alpha_j upwards."""
    increments = np.asarray(alpha, dtype=float)[::-1]
    # first-order recursive filter run from the bottom section; the initial
    # state pins the first output to alpha_K
    rates, _ = lfilter(
        [1.0 - omega], [1.0, -omega], increments, zi=[omega * increments[0]]
    )
    return rates[::-1].copy()


def cumulative_ages(tau0: float, rates: np.ndarray, grid: SectionGrid) -> np.ndarray:
    """Ages at the knots c_0 ... c_K."""
    ages = np.empty(rates.size + 1)
    ages[0] = tau0
    np.cumsum(rates * grid.delta_c, out=ages[1:])
    ages[1:] += tau0
    return ages


def warp_ages(positions: Union[ProxyRecord, np.ndarray], tau0: float, rates: np.ndarray, grid: SectionGrid) -> np.ndarray:
    """tau at every position: tau0 + sum of full sections + partial last section."""
    x = positions.positions if isinstance(positions, ProxyRecord) else np.asarray(positions, dtype=float)
    tolerance = 1e-9 * max(1.0, abs(grid.c_K), abs(grid.c0))
    if np.any(x < grid.c0 - tolerance) or np.any(x > grid.c_K + tolerance):
        raise SupportError(f"positions outside the section grid [{grid.c0}, {grid.c_K}]")
    knot_ages = cumulative_ages(tau0, rates, grid)
    section = np.clip(np.floor((x - grid.c0) / grid.delta_c).astype(int), 0, grid.K - 1)
    return knot_ages[section] + rates[section] * (x - (grid.c0 + section * grid.delta_c))


def tau_at(x: float, tau0: float, rates: np.ndarray, grid: SectionGrid) -> float:
    """tau at a single position."""
    return float(warp_ages(np.array([x], dtype=float), tau0, rates, grid)[0])


def tau_all(record: Union[ProxyRecord, np.ndarray], params: WarpParams, grid: SectionGrid) -> np.ndarray:
    """Warped age of every position of ``record``."""
    return warp_ages(record, params.tau0, params.rates, grid)


def tau_inverse(age: float, tau0: float, rates: np.ndarray, grid: SectionGrid, tol: float = 1e-12) -> float:
    """Position whose warped age is ``age``, by bisection."""
    low, high = grid.c0, grid.c_K
    if not tau_at(low, tau0, rates, grid) <= age <= tau_at(high, tau0, rates, grid):
        raise SupportError(f"age {age} outside the warped range")
    for _ in range(200):
        middle = 0.5 * (low + high)
        if tau_at(middle, tau0, rates, grid) < age:
            low = middle
        else:
            high = middle
        if high - low <= tol * max(1.0, abs(middle)):
            break
    return 0.5 * (low + high)


def in_support(
    params: WarpParams,
    grid: SectionGrid,
    target_range: Tuple[float, float],
    mode: Mode,
) -> bool:
    """Whether the warp stays inside the target age range with admissible rates."""
    return rates_in_support(params.tau0, params.rates, grid, target_range, mode)


def rates_in_support(
    tau0: float,
    rates: np.ndarray,
    grid: SectionGrid,
    target_range: Tuple[float, float],
    mode: Mode,
) -> bool:
    """``in_support`` for rates that are already computed."""
    t_low, t_high = target_range
    if not t_low <= tau0 <= t_high:
        return False
    if not np.all(rates > 0):
        return False
    if mode is Mode.AGE_TO_AGE and not np.all((rates > RATE_BOUNDS[0]) & (rates < RATE_BOUNDS[1])):
        return False
    return float(cumulative_ages(tau0, rates, grid)[-1]) <= t_high
