"""Sampler starting points near the input record's own chronology.

A banded subsequence DTW of the input against the target gives a rough age
for every input position. The ages at the section knots become rates, the
rates become increments, and Powell's method polishes that vector on the
energy. The second t-walk point is a small jitter of the first. Prior draws
remain the fallback when no aligned start can be built.
"""
from __future__ import annotations

import logging
import math
from typing import Final, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import InitializationError
from .model import AlignmentModel
from .sampler import Energy, init_points
from .warp import RATE_BOUNDS, cumulative_ages

logger = logging.getLogger(__name__)

MAX_ROWS: Final[int] = 1000
MAX_COLUMNS: Final[int] = 4000
STEPS_PER_ROW: Final[float] = 4.0
SLOPE_PENALTY: Final[float] = 0.1
ENERGY_CAP: Final[float] = 1e12
JITTER: Final[float] = 0.1


def banded_dtw(cost: np.ndarray, steps: Sequence[np.ndarray], penalties: Sequence[np.ndarray]) -> np.ndarray:
    """Column of every row on the cheapest monotone path through ``cost``.

    Row ``i`` lies ``steps[i][k]`` columns right of row ``i - 1`` at the extra
    cost ``penalties[i][k]``. The path may start and end in any column.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    acc = cost[0].copy()
    back = np.zeros((n, m), dtype=np.int32)
    for i in range(1, n):
        best = np.full(m, np.inf)
        for step, penalty in zip(steps[i], penalties[i]):
            step = int(step)
            if step >= m:
                continue
            candidate = np.full(m, np.inf)
            candidate[step:] = acc[: m - step] + penalty
            better = candidate < best
            best[better] = candidate[better]
            back[i, better] = step
        acc = best + cost[i]
    if not np.any(np.isfinite(acc)):
        raise InitializationError("the input does not fit into the target age range")
    columns = np.empty(n, dtype=int)
    columns[-1] = int(np.argmin(acc))
    for i in range(n - 1, 0, -1):
        columns[i - 1] = columns[i] - back[i, columns[i]]
    return columns


def _robust_scale(values: np.ndarray) -> float:
    q75, q25 = np.percentile(values, [75, 25])
    scale = float(q75 - q25) / 1.349
    if not scale > 0:
        scale = float(np.std(values))
    return scale if scale > 0 else 1.0


def _row_steps(expected: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    low, high = RATE_BOUNDS
    steps, penalties = [], []
    for kbar in expected:
        options = np.arange(math.floor(low * kbar), math.ceil(high * kbar) + 1)
        steps.append(options)
        penalties.append(SLOPE_PENALTY * np.log((options + 0.5) / (kbar + 0.5)) ** 2)
    return steps, penalties


def dtw_ages(model: AlignmentModel) -> Tuple[np.ndarray, np.ndarray]:
    """(positions, ages) of a subsample of the input from a DTW against the target.

    Column steps per row are bounded by ``RATE_BOUNDS`` around the prior
    mean rate of the row's section.
    """
    positions = model.positions
    rows = np.unique(np.linspace(0, positions.size - 1, min(positions.size, MAX_ROWS)).round().astype(int))
    positions = positions[rows]
    values = model.input_values[rows]

    grid = model.grid
    section = np.clip(((positions - grid.c0) // grid.delta_c).astype(int), 0, grid.K - 1)
    span_per_row = np.diff(positions) * model.priors.alpha_means[section[1:]]
    t_low, t_high = model.target_range
    resolution = float(np.median(span_per_row)) / STEPS_PER_ROW if span_per_row.size else t_high - t_low
    resolution = max(resolution, (t_high - t_low) / MAX_COLUMNS)
    n_columns = int(min(MAX_COLUMNS, max(2, math.ceil((t_high - t_low) / resolution) + 1)))
    grid_ages = np.linspace(t_low, t_high, n_columns)
    resolution = grid_ages[1] - grid_ages[0]

    curve_ages, curve_values = model.target_curve(0.5 if model.layout.has_mix else None)
    target = np.interp(grid_ages, curve_ages, curve_values)
    cost = np.abs(values[:, np.newaxis] - target[np.newaxis, :]) / _robust_scale(target)
    steps, penalties = _row_steps(np.concatenate(([0.0], span_per_row / resolution)))
    columns = banded_dtw(cost, steps, penalties)
    logger.debug(
        "DTW start: %d rows on %d target ages, ages %g to %g",
        rows.size,
        n_columns,
        grid_ages[columns[0]],
        grid_ages[columns[-1]],
    )
    return positions, grid_ages[columns]


def increments_from_rates(rates: np.ndarray, omega: float) -> np.ndarray:
    """Inverse of ``rates_from_increments`` for a fixed memory."""
    rates = np.asarray(rates, dtype=float)
    alpha = rates.copy()
    alpha[:-1] = (rates[:-1] - omega * rates[1:]) / (1.0 - omega)
    return alpha


def aligned_guess(model: AlignmentModel) -> np.ndarray:
    """Parameter vector whose warp follows the DTW ages of the input."""
    priors = model.priors
    grid = model.grid
    t_low, t_high = model.target_range
    positions, ages = dtw_ages(model)

    knot_ages = np.interp(grid.knots, positions, ages)
    low, high = RATE_BOUNDS
    rates = np.clip(np.diff(knot_ages) / grid.delta_c, 1.05 * low * priors.alpha_means, 0.95 * high * priors.alpha_means)
    tau0 = float(np.clip(knot_ages[0], t_low, t_high))
    room = t_high - tau0
    total = float(np.sum(rates) * grid.delta_c)
    if not room > 0:
        raise InitializationError("the DTW start places the top at the oldest target age")
    if total > room:
        rates = rates * (1.0 - 1e-9) * room / total

    omega = priors.omega_a / (priors.omega_a + priors.omega_b)
    if rates.size > 1:
        omega = min(omega, 0.9 * float(np.min(rates[:-1] / rates[1:])))
    theta = [tau0, *increments_from_rates(rates, omega), omega]

    if model.layout.has_sigma:
        warped = np.interp(model.positions, grid.knots, cumulative_ages(tau0, rates, grid))
        curve_ages, curve_values = model.target_curve(0.5 if model.layout.has_mix else None)
        residual = model.input_values - np.interp(warped, curve_ages, curve_values)
        spread = 1.4826 * float(np.median(np.abs(residual - np.median(residual))))
        theta.append(max(spread * math.sqrt(model.shape.a / model.shape.b), priors.sigma_mean))
    if model.layout.has_mix:
        theta.append(0.5)
    return np.asarray(theta, dtype=float)


def _scales(model: AlignmentModel, theta: np.ndarray) -> np.ndarray:
    t_low, t_high = model.target_range
    scales = 0.1 * np.abs(theta)
    scales[0] = 0.01 * (t_high - t_low)
    scales[model.grid.K + 1] = 0.05
    if model.layout.has_mix:
        scales[-1] = 0.05
    return np.where(scales > 0, scales, 1e-3)


def polish(energy: Energy, theta: np.ndarray, scales: np.ndarray, max_evaluations: int) -> np.ndarray:
    """Powell minimisation of ``energy`` in units of ``scales`` around ``theta``."""

    def capped(z: np.ndarray) -> float:
        value = float(energy(theta + scales * z))
        return value if value < ENERGY_CAP else ENERGY_CAP

    result = minimize(
        capped,
        np.zeros_like(theta),
        method="Powell",
        options={"maxfev": max_evaluations, "xtol": 1e-3, "ftol": 1e-8},
    )
    best = theta + scales * result.x
    return best if float(energy(best)) < float(energy(theta)) else theta


def aligned_start(
    model: AlignmentModel,
    rng: np.random.Generator,
    max_tries: int = 10_000,
    max_evaluations: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Polished DTW guess and a jittered copy, both with finite energy.

    ``max_evaluations`` defaults to 200 energy evaluations per parameter.
    """
    theta = aligned_guess(model)
    u = float(model.energy(theta))
    if not math.isfinite(u):
        raise InitializationError("the DTW start is outside the support")
    scales = _scales(model, theta)
    best = polish(model.energy, theta, scales, max_evaluations or 200 * theta.size)
    logger.info("aligned start: energy %.2f, polished to %.2f", u, float(model.energy(best)))

    jitter = JITTER * scales
    for _ in range(max_tries):
        candidate = best + jitter * rng.standard_normal(best.size)
        if np.all(candidate != best) and math.isfinite(float(model.energy(candidate))):
            return best, candidate
        jitter = 0.9 * jitter
    raise InitializationError(f"no in-support jitter of the aligned start after {max_tries} tries")


def start_points(
    model: AlignmentModel,
    rng: np.random.Generator,
    max_tries: int = 10_000,
    aligned: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """The two t-walk starting points: an aligned start, else two prior draws."""
    if aligned:
        try:
            return aligned_start(model, rng, max_tries)
        except InitializationError as error:
            logger.warning("starting from prior draws: %s", error)
    return init_points(model.draw_initial, model.energy, rng, max_tries)
