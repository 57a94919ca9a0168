"""Ground-truth fixtures: a known age-depth function, pseudo-targets, noise and downsampling."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Final, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.signal import lfilter

from .errors import ConfigError, DataError, SupportError
from .io import MIN_RECORD_LENGTH, ProxyRecord, ScaleKind, TargetEnsemble

logger = logging.getLogger(__name__)

SMOOTHER_SPAN: Final[float] = 0.25

# (period in yr, amplitude); the two sets share no period so their mixture is identifiable
_TARGET_COMPONENTS: Final[Tuple[Tuple[Tuple[float, float], ...], ...]] = (
    ((9700.0, 1.0), (4100.0, 0.7), (1500.0, 0.5)),
    ((13100.0, 1.0), (5700.0, 0.7), (2300.0, 0.5)),
)
_TARGET_AR: Final[Tuple[Tuple[float, float], ...]] = ((0.9, 0.25), (0.7, 0.35))


@dataclass(frozen=True)
class TrueChronology:
    """dt(x) = (d / b) x (0.9 - cos(pi x / b)) + a on [0, x_max], in yr/cm."""

    a: float = 20.0
    b: float = 250.0
    d: float = 12.0
    x_max: float = 1000.0

    def __post_init__(self) -> None:
        if not (self.b > 0 and self.x_max > 0):
            raise ConfigError("b and x_max must be positive")
        scan = true_dt(np.linspace(0.0, self.x_max, 10_001), self)
        if not np.all(scan > 0):
            raise ConfigError(
                f"deposition time is not positive on [0, {self.x_max}] "
                f"(minimum {scan.min():.4g}); the chronology is infeasible"
            )


@dataclass(frozen=True)
class SyntheticSpec:
    """Mixture weight, noise fraction, affine constants and sampling of one synthetic record."""

    weight: float = 0.7
    noise: float = 0.05
    c1: float = 1.0
    c2: float = 0.0
    n_points: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.weight <= 1:
            raise ConfigError(f"weight must lie in [0, 1], got {self.weight}")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if self.n_points < MIN_RECORD_LENGTH:
            raise ConfigError(f"need at least {MIN_RECORD_LENGTH} points, got {self.n_points}")

    def depths(self, chron: TrueChronology) -> np.ndarray:
        """Uniformly spaced sample depths over [0, x_max]."""
        return np.linspace(0.0, chron.x_max, self.n_points)


def true_dt(x, chron: TrueChronology):
    """Deposition time at depth ``x``."""
    x = np.asarray(x, dtype=float)
    value = (chron.d / chron.b) * x * (0.9 - np.cos(np.pi * x / chron.b)) + chron.a
    return float(value) if value.ndim == 0 else value


def true_t(x, chron: TrueChronology):
    """Age at depth ``x`` by adaptive quadrature of the deposition time, t(0) = 0."""
    depths = np.asarray(x, dtype=float)
    if np.any(depths < 0) or np.any(depths > chron.x_max):
        raise SupportError(f"depth outside [0, {chron.x_max}]")
    points = np.arange(chron.b, chron.x_max, chron.b)

    def integral(upper: float) -> float:
        breaks = points[points < upper]
        value, _ = integrate.quad(
            true_dt, 0.0, upper, args=(chron,), epsabs=1e-10, epsrel=1e-12, limit=200,
            points=breaks if breaks.size else None,
        )
        return value

    ages = np.array([integral(float(upper)) for upper in depths.ravel()]).reshape(depths.shape)
    return float(ages) if ages.ndim == 0 else ages


def closed_form_t(x, chron: TrueChronology):
    """Antiderivative of ``true_dt`` with t(0) = 0."""
    x = np.asarray(x, dtype=float)
    a, b, d = chron.a, chron.b, chron.d
    phase = np.pi * x / b
    value = (
        a * x
        + 0.9 * d * x**2 / (2.0 * b)
        - (d * x / np.pi) * np.sin(phase)
        - (d * b / np.pi**2) * np.cos(phase)
        + d * b / np.pi**2
    )
    return float(value) if value.ndim == 0 else value


def make_pseudo_targets(
    seed: int = 0, length: float = 45_000.0, resolution: float = 20.0
) -> Tuple[ProxyRecord, ProxyRecord]:
    """Two age-indexed series on [0, length]: sinusoids with distinct periods plus AR(1) noise."""
    if not (length > 0 and resolution > 0):
        raise ConfigError("target length and resolution must be positive")
    rng = np.random.default_rng(seed)
    ages = np.arange(0.0, length + 0.5 * resolution, resolution)
    records = []
    for components, (phi, scale) in zip(_TARGET_COMPONENTS, _TARGET_AR):
        values = np.zeros_like(ages)
        for period, amplitude in components:
            values += amplitude * np.sin(2.0 * np.pi * ages / period + rng.uniform(0.0, 2.0 * np.pi))
        shocks = rng.normal(0.0, scale * math.sqrt(1.0 - phi**2), ages.size)
        values += lfilter([1.0], [1.0, -phi], shocks)
        records.append(ProxyRecord(ages, values, ScaleKind.AGE))
    return records[0], records[1]


def local_linear_smooth(x: np.ndarray, y: np.ndarray, span: float = SMOOTHER_SPAN) -> np.ndarray:
    """Tricube-weighted local-linear fit at every x using the nearest ``span`` fraction of points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    k = min(n, max(3, math.ceil(span * n)))
    offsets = x[np.newaxis, :] - x[:, np.newaxis]
    distance = np.abs(offsets)
    radius = np.partition(distance, k - 1, axis=1)[:, k - 1] * (1.0 + 1e-10)
    radius = np.where(radius > 0, radius, 1.0)
    weights = np.clip(1.0 - (distance / radius[:, np.newaxis]) ** 3, 0.0, None) ** 3

    s0 = weights.sum(axis=1)
    s1 = (weights * offsets).sum(axis=1)
    s2 = (weights * offsets**2).sum(axis=1)
    t0 = weights @ y
    t1 = (weights * offsets) @ y
    return (s2 * t0 - s1 * t1) / (s0 * s2 - s1**2)


def residual_sd(x: np.ndarray, y: np.ndarray, span: float = SMOOTHER_SPAN) -> float:
    """Standard deviation of the residuals of ``local_linear_smooth``."""
    return float(np.std(np.asarray(y, dtype=float) - local_linear_smooth(x, y, span), ddof=1))


def make_synthetic_record(
    targets: Tuple[ProxyRecord, ProxyRecord],
    spec: SyntheticSpec,
    chron: TrueChronology,
) -> Tuple[ProxyRecord, np.ndarray]:
    """Depth-indexed noisy record of the mixed targets, and the true age of every depth."""
    first, second = targets
    depths = spec.depths(chron)
    ages = true_t(depths, chron)
    for index, target in enumerate(targets, start=1):
        low, high = target.span
        if low > ages[0] or high < ages[-1]:
            raise SupportError(
                f"target {index} covers [{low}, {high}] yr but the synthetic record "
                f"needs [{ages[0]}, {ages[-1]:.1f}] yr"
            )
    clean = (
        spec.weight * np.interp(ages, first.positions, first.values)
        + (1.0 - spec.weight) * np.interp(ages, second.positions, second.values)
    )
    rng = np.random.default_rng(spec.seed)
    mean = spec.c1 * clean + spec.c2
    if spec.noise > 0:
        scale = spec.noise * residual_sd(depths, clean)
        noisy = rng.normal(mean, scale)
        logger.debug("synthetic noise sd %.4g", scale)
    else:
        noisy = mean
    return ProxyRecord(depths, noisy, ScaleKind.DEPTH), ages


def downsample(record: ProxyRecord, fraction: float) -> ProxyRecord:
    """Keeps ceil(fraction * N) points at uniform index spacing, first and last included."""
    if not 0 < fraction <= 1:
        raise ConfigError(f"fraction must lie in (0, 1], got {fraction}")
    n = len(record)
    keep = math.ceil(fraction * n - 1e-9)
    if keep < MIN_RECORD_LENGTH:
        raise DataError(
            f"fraction {fraction} of {n} points leaves {keep}, need at least {MIN_RECORD_LENGTH}"
        )
    if keep == n:
        return record
    index = np.round(np.linspace(0, n - 1, keep)).astype(int)
    return ProxyRecord(record.positions[index], record.values[index], record.scale_kind)


def add_noise(record: ProxyRecord, level: float, seed: Optional[int] = None) -> ProxyRecord:
    """Adds N(0, (level * sd of the record)^2) noise to every value."""
    if level < 0:
        raise ConfigError(f"noise level must be >= 0, got {level}")
    if level == 0:
        return record
    rng = np.random.default_rng(seed)
    scale = level * float(np.std(record.values, ddof=1))
    return record.with_values(record.values + rng.normal(0.0, scale, len(record)))


def make_target_ensemble(
    target: ProxyRecord,
    n_draws: int,
    seed: Optional[int] = None,
    shape: float = 4.0,
) -> TargetEnsemble:
    """Age ensemble of a target whose chronology is only known up to random-walk errors.

    Every draw rescales each age step by an independent Gamma(shape, 1 / shape)
    factor, so draws are monotone, unbiased and their spread grows down-core.
    The target's ages double as its depth labels.
    """
    if n_draws < 1:
        raise ConfigError(f"need at least one draw, got {n_draws}")
    rng = np.random.default_rng(seed)
    steps = np.diff(target.positions)
    factors = rng.gamma(shape, 1.0 / shape, size=(steps.size, n_draws))
    draws = np.empty((len(target), n_draws))
    draws[0] = target.positions[0]
    draws[1:] = target.positions[0] + np.cumsum(steps[:, np.newaxis] * factors, axis=0)
    return TargetEnsemble(target.positions.copy(), target.values.copy(), draws)
