"""t-walk MCMC over a flat parameter vector, with burn-in/thinning bookkeeping.

The t-walk keeps two points ``x`` and ``xp`` and moves one of them per
iteration with one of four kernels (traverse, walk, blow, hop), accepting
with the usual Metropolis-Hastings ratio on the product space. It needs no
tuning: every proposal scale is taken from the distance between the points.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Final, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .config import McmcOptions
from .errors import DataError, InitializationError, SamplerError

logger = logging.getLogger(__name__)

Energy = Callable[[np.ndarray], float]

TRAVERSE_PARAM: Final[float] = 6.0
WALK_PARAM: Final[float] = 1.5
N1_PHI: Final[float] = 4.0
# traverse, walk, blow, hop
KERNEL_PROBS: Final[Tuple[float, ...]] = (0.4918, 0.4918, 0.0082, 0.0082)
KERNEL_NAMES: Final[Tuple[str, ...]] = ("traverse", "walk", "blow", "hop")
IAT_THRESHOLD: Final[float] = 50.0
MIN_IAT_LENGTH: Final[int] = 100

_KERNEL_CDF = np.cumsum(KERNEL_PROBS) / sum(KERNEL_PROBS)


@dataclass(frozen=True)
class ChainState:
    """The two coupled t-walk points and their energies."""

    x: np.ndarray
    xp: np.ndarray
    u: float
    up: float
    iteration: int = 0
    accepted: int = 0

    @classmethod
    def start(cls, x0: np.ndarray, xp0: np.ndarray, energy: Energy) -> "ChainState":
        """Builds the initial state, checking both points are usable."""
        x0 = np.array(x0, dtype=float)
        xp0 = np.array(xp0, dtype=float)
        if x0.shape != xp0.shape or x0.ndim != 1:
            raise SamplerError("initial points must be 1-d vectors of equal length")
        u, up = float(energy(x0)), float(energy(xp0))
        if not (math.isfinite(u) and math.isfinite(up)):
            raise InitializationError("initial points must have finite energy")
        if np.any(x0 == xp0):
            raise InitializationError("initial points must differ in every coordinate")
        return cls(x=x0, xp=xp0, u=u, up=up)


@dataclass(frozen=True)
class Chain:
    """Retained t-walk output."""

    samples: np.ndarray
    log_objective: np.ndarray
    names: Tuple[str, ...]
    accepted: int
    n_iterations: int
    seed: Optional[int] = None

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        """Fraction of accepted proposals over every iteration, burn-in included."""
        return self.accepted / self.n_iterations if self.n_iterations else 0.0

    def column(self, name: str) -> np.ndarray:
        """Retained draws of one named parameter."""
        return self.samples[:, self.names.index(name)]

    def diagnostics(self, threshold: float = IAT_THRESHOLD) -> Dict[str, float]:
        """IAT of the log-objective, acceptance rate and effective sample size."""
        if len(self) >= MIN_IAT_LENGTH:
            tau = iat(self.log_objective)
        else:
            tau = float("nan")
        return {
            "n_samples": float(len(self)),
            "n_iterations": float(self.n_iterations),
            "acceptance_rate": self.acceptance_rate,
            "iat": tau,
            "ess": len(self) / tau if math.isfinite(tau) else float("nan"),
            "iat_pass": float(math.isfinite(tau) and tau < threshold),
        }


def _sim_beta(rng: np.random.Generator) -> float:
    if rng.random() < (TRAVERSE_PARAM - 1.0) / (2.0 * TRAVERSE_PARAM):
        return math.exp(math.log(rng.random()) / (TRAVERSE_PARAM + 1.0))
    return math.exp(math.log(rng.random()) / (1.0 - TRAVERSE_PARAM))


def _gaussian_log_kernel(diff: np.ndarray, scale: float) -> float:
    return -diff.size * math.log(scale) - 0.5 * float(diff @ diff) / scale**2


def twalk_step(state: ChainState, energy: Energy, rng: np.random.Generator) -> ChainState:
    """One t-walk update of one of the two points.

    Proposals with non-finite energy are rejected, as are proposals that
    share a coordinate with the other point; in that case only the iteration
    counter changes.
    """
    n = state.x.size
    move_x = rng.random() < 0.5
    current, other = (state.x, state.xp) if move_x else (state.xp, state.x)
    u_current = state.u if move_x else state.up

    phi = rng.random(n) < min(n, N1_PHI) / n
    if not phi.any():
        phi[rng.integers(n)] = True
    n_phi = int(phi.sum())

    kernel = int(np.searchsorted(_KERNEL_CDF, rng.random(), side="right"))
    proposal = current.copy()
    log_proposal_ratio = 0.0
    if kernel == 0:
        beta = _sim_beta(rng)
        proposal[phi] = other[phi] + beta * (other[phi] - current[phi])
        log_proposal_ratio = (n_phi - 2) * math.log(beta)
    elif kernel == 1:
        draws = rng.random(n_phi)
        z = (WALK_PARAM / (1.0 + WALK_PARAM)) * (WALK_PARAM * draws**2 + 2.0 * draws - 1.0)
        proposal[phi] = current[phi] + (current[phi] - other[phi]) * z
    else:
        divisor = 1.0 if kernel == 2 else 3.0
        scale = float(np.max(np.abs(other[phi] - current[phi]))) / divisor
        if scale <= 0.0:
            return dataclasses.replace(state, iteration=state.iteration + 1)
        centre = other[phi] if kernel == 2 else current[phi]
        proposal[phi] = centre + scale * rng.standard_normal(n_phi)
        back_scale = float(np.max(np.abs(other[phi] - proposal[phi]))) / divisor
        if back_scale <= 0.0:
            return dataclasses.replace(state, iteration=state.iteration + 1)
        if kernel == 2:
            forward = _gaussian_log_kernel(proposal[phi] - other[phi], scale)
            backward = _gaussian_log_kernel(current[phi] - other[phi], back_scale)
        else:
            forward = _gaussian_log_kernel(proposal[phi] - current[phi], scale)
            backward = _gaussian_log_kernel(current[phi] - proposal[phi], back_scale)
        log_proposal_ratio = backward - forward

    # the two points must stay apart in every coordinate
    if np.any(proposal == other):
        return dataclasses.replace(state, iteration=state.iteration + 1)

    u_proposal = float(energy(proposal))
    accept = False
    if math.isfinite(u_proposal):
        log_ratio = (u_current - u_proposal) + log_proposal_ratio
        accept = log_ratio >= 0.0 or math.log(rng.random()) < log_ratio

    if not accept:
        return dataclasses.replace(state, iteration=state.iteration + 1)
    if move_x:
        return dataclasses.replace(
            state,
            x=proposal,
            u=u_proposal,
            iteration=state.iteration + 1,
            accepted=state.accepted + 1,
        )
    return dataclasses.replace(
        state,
        xp=proposal,
        up=u_proposal,
        iteration=state.iteration + 1,
        accepted=state.accepted + 1,
    )


def plan_iterations(n_params: int, options: McmcOptions) -> Tuple[int, int]:
    """Returns (burn_in, keep_every) following the 100 * n * thinning convention."""
    keep_every = n_params * options.thinning
    burn_in = options.burn_in if options.burn_in is not None else 100 * keep_every
    return burn_in, keep_every


def run_mcmc(
    options: McmcOptions,
    energy: Energy,
    init: Tuple[np.ndarray, np.ndarray],
    rng: np.random.Generator,
    names: Optional[Sequence[str]] = None,
    seed: Optional[int] = None,
) -> Chain:
    """Runs burn-in, then keeps every ``n * thinning``-th state of ``x``."""
    state = ChainState.start(init[0], init[1], energy)
    n_params = state.x.size
    if names is None:
        names = tuple(f"theta_{i}" for i in range(n_params))
    if len(names) != n_params:
        raise SamplerError(f"{len(names)} names for {n_params} parameters")

    burn_in, keep_every = plan_iterations(n_params, options)
    total = burn_in + options.n_samples * keep_every
    logger.info(
        "t-walk: %d parameters, burn-in %d, keeping every %d, %d iterations in total",
        n_params,
        burn_in,
        keep_every,
        total,
    )

    samples = np.empty((options.n_samples, n_params))
    log_objective = np.empty(options.n_samples)
    kept = 0
    for iteration in tqdm(range(1, total + 1), disable=not options.progress, unit="it"):
        state = twalk_step(state, energy, rng)
        if iteration > burn_in and (iteration - burn_in) % keep_every == 0:
            samples[kept] = state.x
            log_objective[kept] = state.u
            kept += 1

    chain = Chain(
        samples=samples,
        log_objective=log_objective,
        names=tuple(names),
        accepted=state.accepted,
        n_iterations=state.iteration,
        seed=seed,
    )
    logger.info("t-walk done: acceptance rate %.3f", chain.acceptance_rate)
    return chain


def init_points(
    draw: Callable[[np.random.Generator], np.ndarray],
    energy: Energy,
    rng: np.random.Generator,
    max_tries: int = 10_000,
) -> Tuple[np.ndarray, np.ndarray]:
    """Draws two prior points with finite energy that differ in every coordinate."""
    points = []
    for attempt in range(1, max_tries + 1):
        candidate = np.asarray(draw(rng), dtype=float)
        if not math.isfinite(float(energy(candidate))):
            continue
        if points and np.any(candidate == points[0]):
            continue
        points.append(candidate)
        if len(points) == 2:
            logger.debug("initial points found after %d prior draws", attempt)
            return points[0], points[1]
    raise InitializationError(
        f"no pair of in-support starting points after {max_tries} prior draws"
    )


def iat(series: Sequence[float]) -> float:
    """Integrated autocorrelation time by Geyer's initial positive sequence."""
    values = np.asarray(series, dtype=float)
    n = values.size
    if n < MIN_IAT_LENGTH:
        raise DataError(f"chain too short: {n} samples, need at least {MIN_IAT_LENGTH}")
    centred = values - values.mean()
    if not np.any(np.abs(centred) > 1e-12 * max(1.0, float(np.abs(values).max()))):
        return 1.0
    spectrum = np.fft.rfft(centred, n=2 * n)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), n=2 * n)[:n] / n
    rho = acov / acov[0]

    total = 0.0
    for k in range(n // 2):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        total += pair
    return max(1.0, -1.0 + 2.0 * total)
