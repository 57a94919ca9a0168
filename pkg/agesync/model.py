"""Priors, alignment likelihoods and the log-posterior over a flat parameter vector.

Densities are written with ``scipy.special`` so that a single posterior
evaluation stays cheap; ``scipy.stats`` is used for drawing and for the
reference checks in the tests.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Final, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.interpolate import interp1d
from scipy.special import gammaln, log_ndtr, logsumexp, xlogy

from .config import Mode, PriorOptions, Strategy
from .errors import DataError, EnsembleError
from .io import ProxyRecord, TargetEnsemble
from .preprocess import MixedTargets, apply_rescale, mix_targets
from .warp import SectionGrid, cumulative_ages, rates_from_increments, rates_in_support, warp_ages

logger = logging.getLogger(__name__)

LOG_2PI: Final[float] = math.log(2.0 * math.pi)
NEG_INF: Final[float] = -math.inf


@dataclass(frozen=True)
class TShape:
    """Shape parameters of the alignment t-distribution."""

    a: float = 3.0
    b: float = 4.0

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError("t-distribution shapes must be positive")

    @property
    def log_norm(self) -> float:
        """log(Gamma(a + 1/2) / (Gamma(a) sqrt(2 pi)) * b^a)."""
        return float(gammaln(self.a + 0.5) - gammaln(self.a) - 0.5 * LOG_2PI + self.a * math.log(self.b))


# -- priors ------------------------------------------------------------------


def _log_trunc_mass(mu: float, sd: float, lo: float, hi: float) -> float:
    """log(Phi((hi - mu) / sd) - Phi((lo - mu) / sd))."""
    upper = log_ndtr((hi - mu) / sd)
    lower = log_ndtr((lo - mu) / sd)
    return float(upper + np.log1p(-np.exp(lower - upper)))


def log_prior_alpha(alpha, shape, mean):
    """Gamma(shape, rate = shape / mean) log-density; -inf for alpha <= 0."""
    alpha = np.asarray(alpha, dtype=float)
    shape = np.asarray(shape, dtype=float)
    rate = shape / np.asarray(mean, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = xlogy(shape, rate) - gammaln(shape) + xlogy(shape - 1.0, alpha) - rate * alpha
    value = np.where(alpha > 0, value, NEG_INF)
    return float(value) if value.ndim == 0 else value


def log_prior_omega(omega, a_w: float = 5.0, b_w: float = 5.0):
    """Beta(a_w, b_w) log-density; -inf outside (0, 1)."""
    return _log_beta(omega, a_w, b_w)


def _log_beta(x, a: float, b: float):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    safe = np.where(inside, x, 0.5)
    value = (
        gammaln(a + b)
        - gammaln(a)
        - gammaln(b)
        + xlogy(a - 1.0, safe)
        + xlogy(b - 1.0, 1.0 - safe)
    )
    value = np.where(inside, value, NEG_INF)
    return float(value) if value.ndim == 0 else value


def log_prior_tau0(tau0, mu: float, sd: float, lo: float, hi: float):
    """Normal(mu, sd^2) truncated to [lo, hi], renormalized; -inf outside."""
    tau0 = np.asarray(tau0, dtype=float)
    z = (tau0 - mu) / sd
    value = -0.5 * z**2 - 0.5 * LOG_2PI - math.log(sd) - _log_trunc_mass(mu, sd, lo, hi)
    value = np.where((tau0 >= lo) & (tau0 <= hi), value, NEG_INF)
    return float(value) if value.ndim == 0 else value


def log_prior_sigma(sigma, shape: float = 1.5, mean: float = 0.01):
    """Gamma(shape, rate = shape / mean); the default rate is 150."""
    return log_prior_alpha(sigma, shape, mean)


def log_prior_mix(w, a: float = 1.0, b: float = 1.0):
    """Beta(a, b) on the mixing weight; uniform by default."""
    return _log_beta(w, a, b)


def log_prior_taun(tau_n, t_n: Optional[float], sd: Optional[float], lo: float, hi: float) -> float:
    """Soft constraint on the induced bottom age; exactly 0 when not configured."""
    if t_n is None or sd is None:
        return 0.0
    return log_prior_tau0(tau_n, t_n, sd, lo, hi)


def elicit_alpha_means(
    age_model: Union[ProxyRecord, TargetEnsemble, None],
    grid: SectionGrid,
    mode: Mode,
    target_range: Tuple[float, float],
    global_mean: Optional[float] = None,
) -> np.ndarray:
    """Per-section prior means of the increments.

    Age-to-age runs default to 1 (no change of the input's age scale). Age-depth
    runs use the slope of a prior age-depth model across each section when one
    is given, else the span of the target ages over the span of the input.
    """
    if global_mean is not None:
        return np.full(grid.K, float(global_mean))
    if mode is Mode.AGE_TO_AGE:
        return np.ones(grid.K)
    if age_model is None:
        t_low, t_high = target_range
        return np.full(grid.K, (t_high - t_low) / (grid.c_K - grid.c0))

    record = age_model.median_record() if isinstance(age_model, TargetEnsemble) else age_model
    if np.any(np.diff(record.values) <= 0):
        raise DataError("the prior age-depth model is not strictly increasing")
    ages = interp1d(record.positions, record.values, fill_value="extrapolate")(grid.knots)
    means = np.diff(ages) / grid.delta_c
    if np.any(means <= 0):
        raise DataError("the prior age-depth model gives non-positive section slopes")
    return means


@dataclass(frozen=True)
class PriorSpec:
    """All prior hyperparameters of one run, on the target age range [t_low, t_high]."""

    alpha_means: np.ndarray
    t_low: float
    t_high: float
    tau0_mean: float
    tau0_sd: float
    alpha_shape: float = 1.5
    omega_a: float = 5.0
    omega_b: float = 5.0
    sigma_shape: float = 1.5
    sigma_mean: float = 0.01
    mix_a: float = 1.0
    mix_b: float = 1.0
    taun_mean: Optional[float] = None
    taun_sd: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.t_low < self.tau0_mean < self.t_high:
            raise DataError(
                f"tau0 prior mean {self.tau0_mean} must lie strictly inside "
                f"the target range ({self.t_low}, {self.t_high})"
            )
        if np.any(np.asarray(self.alpha_means) <= 0):
            raise DataError("alpha prior means must be positive")
        object.__setattr__(self, "alpha_means", np.asarray(self.alpha_means, dtype=float))

    @classmethod
    def from_options(
        cls,
        options: PriorOptions,
        alpha_means: np.ndarray,
        target_range: Tuple[float, float],
        mode: Mode,
        input_start: float,
    ) -> "PriorSpec":
        """Fills data-derived defaults: tau0 mean and sd from the target range."""
        t_low, t_high = target_range
        span = t_high - t_low
        if options.tau0_mean is not None:
            mu = options.tau0_mean
        elif mode is Mode.AGE_TO_AGE:
            mu = input_start
        else:
            mu = t_low + 0.01 * span
        mu = min(max(mu, t_low + 1e-6 * span), t_high - 1e-6 * span)
        return cls(
            alpha_means=alpha_means,
            t_low=t_low,
            t_high=t_high,
            tau0_mean=mu,
            tau0_sd=options.tau0_sd if options.tau0_sd is not None else 0.25 * span,
            alpha_shape=options.alpha_shape,
            omega_a=options.omega_a,
            omega_b=options.omega_b,
            sigma_shape=options.sigma_shape,
            sigma_mean=options.sigma_mean,
            mix_a=options.mix_a,
            mix_b=options.mix_b,
            taun_mean=options.taun_mean,
            taun_sd=options.taun_sd,
        )

    @property
    def K(self) -> int:
        """Number of sections."""
        return self.alpha_means.size

    def tau0_logpdf(self, tau0):
        """Prior log-density of the top age."""
        return log_prior_tau0(tau0, self.tau0_mean, self.tau0_sd, self.t_low, self.t_high)

    def omega_logpdf(self, omega):
        """Prior log-density of the memory."""
        return log_prior_omega(omega, self.omega_a, self.omega_b)

    def sigma_logpdf(self, sigma):
        """Prior log-density of the alignment scale."""
        return log_prior_sigma(sigma, self.sigma_shape, self.sigma_mean)

    def mix_logpdf(self, w):
        """Prior log-density of the mixing weight."""
        return log_prior_mix(w, self.mix_a, self.mix_b)

    def draw_tau0(self, rng: np.random.Generator, sd: Optional[float] = None) -> float:
        """One draw of the top age, optionally with a narrower sd."""
        scale = self.tau0_sd if sd is None else sd
        lo = (self.t_low - self.tau0_mean) / scale
        hi = (self.t_high - self.tau0_mean) / scale
        return float(stats.truncnorm(lo, hi, loc=self.tau0_mean, scale=scale).rvs(random_state=rng))


# -- likelihoods -------------------------------------------------------------


def loglik_t(u, v, sigma: float, shape: TShape = TShape()):
    """Normalized scaled-t log-density of u around v with scale sigma."""
    residual = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    value = (
        shape.log_norm
        - math.log(sigma)
        - (shape.a + 0.5) * np.log(shape.b + residual**2 / (2.0 * sigma**2))
    )
    return float(value) if np.ndim(value) == 0 else value


def loglik_double(u, v1, v2, w: float, sigma: float, shape: TShape = TShape()):
    """t log-density against the mixed target w * v1 + (1 - w) * v2."""
    return loglik_t(u, mix_targets(v1, v2, w), sigma, shape)


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is zero.

    Returns exactly 0 for fewer than two values or values without spread.
    """
    n = values.size
    if n < 2 or np.ptp(values) <= 1e-12 * max(1.0, float(np.abs(values).max())):
        return 0.0
    sd = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


@dataclass(frozen=True)
class KdeTable:
    """Gaussian kernel density of the target proxy per age window."""

    edges: np.ndarray
    samples: Tuple[np.ndarray, ...]
    bandwidths: np.ndarray
    floor: float = -30.0
    _padded: np.ndarray = field(init=False, repr=False, compare=False)
    _log_counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float)
        if edges.size != len(self.samples) + 1 or np.any(np.diff(edges) <= 0):
            raise EnsembleError("window edges must be increasing, one more than windows")
        bandwidths = np.asarray(self.bandwidths, dtype=float)
        if bandwidths.size != len(self.samples) or np.any(bandwidths <= 0):
            raise EnsembleError("every window needs a positive bandwidth")
        counts = np.array([len(s) for s in self.samples])
        if np.any(counts == 0):
            raise EnsembleError("every window needs at least one sample")
        padded = np.full((counts.size, counts.max()), np.nan)
        for index, members in enumerate(self.samples):
            padded[index, : members.size] = members
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "bandwidths", bandwidths)
        object.__setattr__(self, "_padded", padded)
        object.__setattr__(self, "_log_counts", np.log(counts))

    @property
    def age_range(self) -> Tuple[float, float]:
        """First and last window edge."""
        return float(self.edges[0]), float(self.edges[-1])

    @property
    def n_windows(self) -> int:
        """Number of windows."""
        return len(self.samples)

    def window_of(self, ages: np.ndarray) -> np.ndarray:
        """Window index per age; ages on the last edge belong to the last window."""
        index = np.searchsorted(self.edges, ages, side="right") - 1
        return np.clip(index, 0, self.n_windows - 1)

    def log_density(self, u, ages):
        """Floored log KDE density of ``u`` in the window of each age; -inf outside."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        ages = np.atleast_1d(np.asarray(ages, dtype=float))
        windows = self.window_of(ages)
        bandwidth = self.bandwidths[windows][:, np.newaxis]
        z = (u[:, np.newaxis] - self._padded[windows]) / bandwidth
        kernel = -0.5 * z**2 - np.log(bandwidth) - 0.5 * LOG_2PI
        kernel = np.where(np.isnan(kernel), NEG_INF, kernel)
        density = logsumexp(kernel, axis=1) - self._log_counts[windows]
        density = np.maximum(density, self.floor)
        low, high = self.age_range
        return np.where((ages >= low) & (ages <= high), density, NEG_INF)


def build_kde_table(
    ensemble: TargetEnsemble,
    n_windows: Optional[int] = None,
    min_samples: int = 30,
    max_samples: int = 500,
    floor: float = -30.0,
    min_bandwidth: float = 0.05,
) -> KdeTable:
    """Pools (age draw, proxy) pairs into equal age windows over the draws' range.

    Windows with fewer than ``min_samples`` pairs borrow the pairs of the
    nearest window that has enough. Windows holding more than ``max_samples``
    keep an evenly spaced subset of their sorted values. The proxy values
    should already be rescaled.
    """
    if n_windows is None:
        n_windows = int(np.unique(ensemble.positions).size)
    low, high = ensemble.age_range
    if high <= low:
        low, high = low - 0.5, high + 0.5
    edges = np.linspace(low, high, n_windows + 1)

    ages = ensemble.draws.ravel()
    proxy = np.repeat(ensemble.proxy, ensemble.n_draws)
    windows = np.clip(np.searchsorted(edges, ages, side="right") - 1, 0, n_windows - 1)
    order = np.argsort(windows, kind="stable")
    counts = np.bincount(windows, minlength=n_windows)
    groups: List[np.ndarray] = np.split(proxy[order], np.cumsum(counts)[:-1])

    populated = np.flatnonzero(counts >= min_samples)
    if populated.size == 0:
        populated = np.flatnonzero(counts > 0)
    if populated.size == 0:
        raise EnsembleError("every KDE window is empty")
    if populated.size < n_windows:
        logger.debug("%d of %d KDE windows borrow samples", n_windows - populated.size, n_windows)

    centres = 0.5 * (edges[:-1] + edges[1:])
    samples, bandwidths = [], []
    for index in range(n_windows):
        source = index
        if counts[index] < min_samples or index not in populated:
            source = int(populated[np.argmin(np.abs(centres[populated] - centres[index]))])
        members = np.sort(groups[source])
        bandwidth = silverman_bandwidth(members)
        if members.size > max_samples:
            members = members[np.linspace(0, members.size - 1, max_samples).round().astype(int)]
        samples.append(members)
        bandwidths.append(bandwidth if bandwidth > 0 else min_bandwidth)
    return KdeTable(edges=edges, samples=tuple(samples), bandwidths=np.array(bandwidths), floor=floor)


def loglik_kde(u, age, table: KdeTable):
    """Log KDE density of ``u`` at ``age``; -inf outside the table's age range."""
    value = table.log_density(u, age)
    return float(value[0]) if np.ndim(u) == 0 and np.ndim(age) == 0 else value


# -- posterior ---------------------------------------------------------------


@dataclass(frozen=True)
class ParameterLayout:
    """Positions of each parameter in the flat vector for one strategy."""

    K: int
    strategy: Strategy

    @property
    def has_sigma(self) -> bool:
        """UQ runs have no alignment scale."""
        return self.strategy is not Strategy.UQ

    @property
    def has_mix(self) -> bool:
        """Only double-target runs sample a mixing weight."""
        return self.strategy is Strategy.DOUBLE

    @property
    def size(self) -> int:
        """Vector length: K + 3 (single), K + 2 (uq), K + 4 (double)."""
        return self.K + 2 + int(self.has_sigma) + int(self.has_mix)

    @property
    def names(self) -> Tuple[str, ...]:
        """Column names in vector order."""
        names = ["tau0", *(f"alpha_{j + 1}" for j in range(self.K)), "omega"]
        if self.has_sigma:
            names.append("sigma")
        if self.has_mix:
            names.append("mix")
        return tuple(names)

    def split(self, theta: np.ndarray) -> Tuple[float, np.ndarray, float, Optional[float], Optional[float]]:
        """(tau0, alpha, omega, sigma, mix) with ``None`` for absent entries."""
        K = self.K
        sigma = float(theta[K + 2]) if self.has_sigma else None
        mix = float(theta[-1]) if self.has_mix else None
        return float(theta[0]), theta[1 : K + 1], float(theta[K + 1]), sigma, mix


TargetData = Union[ProxyRecord, MixedTargets, KdeTable]


@dataclass(frozen=True)
class AlignmentModel:
    """Frozen data, priors and link function; ``log_posterior`` is a pure function of theta.

    ``input_values`` are the rescaled input proxies. ``target`` is the rescaled
    target record (single), the cached raw pair (double) or the KDE table (uq).
    """

    mode: Mode
    strategy: Strategy
    grid: SectionGrid
    positions: np.ndarray
    input_values: np.ndarray
    priors: PriorSpec
    target: TargetData
    shape: TShape = TShape()

    def __post_init__(self) -> None:
        expected = {
            Strategy.SINGLE: ProxyRecord,
            Strategy.DOUBLE: MixedTargets,
            Strategy.UQ: KdeTable,
        }[self.strategy]
        if not isinstance(self.target, expected):
            raise TypeError(f"strategy {self.strategy.value} needs a {expected.__name__} target")

    @property
    def layout(self) -> ParameterLayout:
        """Vector layout for this run."""
        return ParameterLayout(self.grid.K, self.strategy)

    @property
    def target_range(self) -> Tuple[float, float]:
        """(t'_0, t'_m)."""
        return self.priors.t_low, self.priors.t_high

    def warp(self, theta: Sequence[float]) -> Optional[np.ndarray]:
        """Ages of the input positions, or ``None`` when theta is out of support."""
        theta = np.asarray(theta, dtype=float)
        tau0, alpha, omega, _, _ = self.layout.split(theta)
        if np.any(alpha <= 0) or not 0 <= omega <= 1:
            return None
        rates = rates_from_increments(alpha, omega)
        if not rates_in_support(tau0, rates, self.grid, self.target_range, self.mode):
            return None
        ages = warp_ages(self.positions, tau0, rates, self.grid)
        t_low, t_high = self.target_range
        if ages[0] < t_low or ages[-1] > t_high:
            return None
        return ages

    def log_prior(self, theta: Sequence[float]) -> float:
        """Sum of every prior term, including the bottom-age soft constraint."""
        theta = np.asarray(theta, dtype=float)
        tau0, alpha, omega, sigma, mix = self.layout.split(theta)
        priors = self.priors
        total = float(np.sum(log_prior_alpha(alpha, priors.alpha_shape, priors.alpha_means)))
        total += priors.tau0_logpdf(tau0) + priors.omega_logpdf(omega)
        if sigma is not None:
            total += priors.sigma_logpdf(sigma)
        if mix is not None:
            total += priors.mix_logpdf(mix)
        if priors.taun_mean is not None and math.isfinite(total):
            bottom = float(cumulative_ages(tau0, rates_from_increments(alpha, omega), self.grid)[-1])
            total += log_prior_taun(bottom, priors.taun_mean, priors.taun_sd, priors.t_low, priors.t_high)
        return total

    def log_likelihood_terms(self, theta: Sequence[float], ages: np.ndarray) -> np.ndarray:
        """Per-observation log-likelihood at the given warped ages."""
        theta = np.asarray(theta, dtype=float)
        _, _, _, sigma, mix = self.layout.split(theta)
        if isinstance(self.target, KdeTable):
            return self.target.log_density(self.input_values, ages)
        if isinstance(self.target, MixedTargets):
            first, second = self.target.components_at(ages)
            rescale = self.target.rescale_map(mix)
            values = apply_rescale(mix_targets(first, second, mix), rescale)
        else:
            values = np.interp(ages, self.target.positions, self.target.values)
        return loglik_t(self.input_values, values, sigma, self.shape)

    def log_posterior(self, theta: Sequence[float]) -> float:
        """Log-likelihood plus log-priors; -inf out of support."""
        theta = np.asarray(theta, dtype=float)
        tau0, alpha, omega, sigma, mix = self.layout.split(theta)
        if sigma is not None and not sigma > 0:
            return NEG_INF
        if mix is not None and not 0 < mix < 1:
            return NEG_INF
        ages = self.warp(theta)
        if ages is None:
            return NEG_INF
        prior = self.log_prior(theta)
        if not math.isfinite(prior):
            return NEG_INF
        return prior + float(np.sum(self.log_likelihood_terms(theta, ages)))

    def energy(self, theta: Sequence[float]) -> float:
        """-log posterior; +inf out of support."""
        return -self.log_posterior(theta)

    def draw_initial(self, rng: np.random.Generator) -> np.ndarray:
        """One prior draw for starting the sampler.

        The top age is drawn with a narrowed sd so that the induced bottom age
        lands in range more often; age-to-age increments start near 1.
        """
        priors = self.priors
        span = priors.t_high - priors.t_low
        theta = [priors.draw_tau0(rng, sd=min(priors.tau0_sd, 0.05 * span))]
        if self.mode is Mode.AGE_TO_AGE:
            theta.extend(rng.uniform(0.9, 1.1, self.grid.K))
        else:
            theta.extend(
                stats.gamma(priors.alpha_shape, scale=priors.alpha_means / priors.alpha_shape).rvs(
                    random_state=rng
                )
            )
        theta.append(stats.beta(priors.omega_a, priors.omega_b).rvs(random_state=rng))
        if self.layout.has_sigma:
            theta.append(
                stats.gamma(priors.sigma_shape, scale=priors.sigma_mean / priors.sigma_shape).rvs(
                    random_state=rng
                )
            )
        if self.layout.has_mix:
            theta.append(stats.beta(priors.mix_a, priors.mix_b).rvs(random_state=rng))
        return np.asarray(theta, dtype=float)

    def ages_at(self, theta: Sequence[float], positions: np.ndarray) -> np.ndarray:
        """Warped ages of arbitrary positions on the grid (no support check)."""
        tau0, alpha, omega, _, _ = self.layout.split(np.asarray(theta, dtype=float))
        return warp_ages(positions, tau0, rates_from_increments(alpha, omega), self.grid)

    def target_curve(self, mix: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Ages and rescaled values of the target used for plot data."""
        if isinstance(self.target, ProxyRecord):
            return self.target.positions, self.target.values
        if isinstance(self.target, MixedTargets):
            return self.target.ages, self.target.mixed(0.5 if mix is None else mix)
        centres = 0.5 * (self.target.edges[:-1] + self.target.edges[1:])
        return centres, np.array([float(np.median(s)) for s in self.target.samples])


def log_posterior(theta: Sequence[float], model: AlignmentModel) -> float:
    """Functional form of ``AlignmentModel.log_posterior``."""
    return model.log_posterior(theta)
