"""Scoring posterior age ensembles against known true ages."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Final, Tuple

import numpy as np
import pandas as pd

from .errors import DataError

DEFAULT_LEVEL: Final[float] = 0.95


@dataclass(frozen=True)
class ScoreCard:
    """Coverage, accuracy and precision of one alignment."""

    coverage: float
    mean_abs_error: float
    mean_interval_width: float
    delta_t_sd: np.ndarray

    def as_dict(self) -> Dict[str, float]:
        """Scalar metrics; ``delta_t_sd`` is summarized by its mean absolute value."""
        finite = self.delta_t_sd[np.isfinite(self.delta_t_sd)]
        return {
            "coverage": self.coverage,
            "mean_abs_error": self.mean_abs_error,
            "mean_interval_width": self.mean_interval_width,
            "mean_abs_delta_t_sd": float(np.mean(np.abs(finite))) if finite.size else float("nan"),
        }


def _ensemble(age_ensemble) -> np.ndarray:
    ages = np.asarray(age_ensemble, dtype=float)
    if ages.ndim == 1:
        ages = ages[np.newaxis, :]
    if ages.ndim != 2 or ages.size == 0:
        raise DataError("empty age ensemble")
    return ages


def _truth(truth, n_positions: int) -> np.ndarray:
    values = np.asarray(truth, dtype=float).ravel()
    if values.size != n_positions:
        raise DataError(f"{values.size} true ages for {n_positions} positions")
    return values


def interval(age_ensemble, level: float = DEFAULT_LEVEL) -> Tuple[np.ndarray, np.ndarray]:
    """Equal-tailed interval per position from order statistics."""
    if not 0 < level < 1:
        raise DataError(f"level must lie in (0, 1), got {level}")
    ages = _ensemble(age_ensemble)
    tail = (1.0 - level) / 2.0
    lower = np.quantile(ages, tail, axis=1, method="inverted_cdf")
    upper = np.quantile(ages, 1.0 - tail, axis=1, method="inverted_cdf")
    return lower, upper


def summarize(age_ensemble, level: float = DEFAULT_LEVEL) -> pd.DataFrame:
    """Median, 95% bounds, mean and sd per position."""
    ages = _ensemble(age_ensemble)
    lower, upper = interval(ages, level)
    return pd.DataFrame(
        {
            "median": np.median(ages, axis=1),
            "lower95": lower,
            "upper95": upper,
            "mean": ages.mean(axis=1),
            "sd": ages.std(axis=1, ddof=1) if ages.shape[1] > 1 else np.zeros(ages.shape[0]),
        }
    )


def coverage(age_ensemble, truth, level: float = DEFAULT_LEVEL) -> float:
    """Fraction of positions whose central interval contains the true age."""
    lower, upper = interval(age_ensemble, level)
    values = _truth(truth, lower.size)
    return float(np.mean((lower <= values) & (values <= upper)))


def mean_abs_error(age_ensemble, truth) -> float:
    """Mean over positions of |posterior median - truth|."""
    ages = _ensemble(age_ensemble)
    values = _truth(truth, ages.shape[0])
    return float(np.mean(np.abs(np.median(ages, axis=1) - values)))


def mean_interval_width(age_ensemble, level: float = DEFAULT_LEVEL) -> float:
    """Mean width of the central intervals."""
    lower, upper = interval(age_ensemble, level)
    return float(np.mean(upper - lower))


def delta_t_sd(age_ensemble, truth) -> np.ndarray:
    """(posterior median - truth) / posterior sd; NaN where the sd is zero."""
    ages = _ensemble(age_ensemble)
    values = _truth(truth, ages.shape[0])
    sd = ages.std(axis=1, ddof=1) if ages.shape[1] > 1 else np.zeros(ages.shape[0])
    deviation = np.median(ages, axis=1) - values
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sd > 0, deviation / np.where(sd > 0, sd, 1.0), np.nan)


def score(age_ensemble, truth, level: float = DEFAULT_LEVEL) -> ScoreCard:
    """All metrics from a full ensemble."""
    return ScoreCard(
        coverage=coverage(age_ensemble, truth, level),
        mean_abs_error=mean_abs_error(age_ensemble, truth),
        mean_interval_width=mean_interval_width(age_ensemble, level),
        delta_t_sd=delta_t_sd(age_ensemble, truth),
    )


def score_summary(summary: pd.DataFrame, truth) -> ScoreCard:
    """All metrics from the per-position columns of ``ages.csv``."""
    if summary.empty:
        raise DataError("empty age summary")
    values = _truth(truth, len(summary))
    lower = summary["lower95"].to_numpy(dtype=float)
    upper = summary["upper95"].to_numpy(dtype=float)
    median = summary["median"].to_numpy(dtype=float)
    sd = summary["sd"].to_numpy(dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        deltas = np.where(sd > 0, (median - values) / np.where(sd > 0, sd, 1.0), np.nan)
    return ScoreCard(
        coverage=float(np.mean((lower <= values) & (values <= upper))),
        mean_abs_error=float(np.mean(np.abs(median - values))),
        mean_interval_width=float(np.mean(upper - lower)),
        delta_t_sd=deltas,
    )
