"""Reading and writing records, ensembles and alignment results (CSV only)."""
from __future__ import annotations

import enum
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Final, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import EnsembleError, OutputError, RecordError, SamplerError
from .metrics import summarize
from .sampler import Chain

logger = logging.getLogger(__name__)

FLOAT_FORMAT: Final[str] = "%.17g"
MIN_RECORD_LENGTH: Final[int] = 4
MIN_ENSEMBLE_DRAWS: Final[int] = 100
HISTOGRAM_BINS: Final[int] = 40
AGES_COLUMNS: Final[Tuple[str, ...]] = ("position", "median", "lower95", "upper95", "mean", "sd")


class ScaleKind(str, enum.Enum):
    """Unit of a record's position axis."""

    DEPTH = "depth"
    AGE = "age"


@dataclass(frozen=True)
class ProxyRecord:
    """Proxy values on strictly increasing positions (depth or age)."""

    positions: np.ndarray
    values: np.ndarray
    scale_kind: ScaleKind = ScaleKind.DEPTH

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if positions.ndim != 1 or positions.shape != values.shape:
            raise RecordError("positions and values must be 1-d and of equal length")
        if positions.size < MIN_RECORD_LENGTH:
            raise RecordError(
                f"a record needs at least {MIN_RECORD_LENGTH} points, got {positions.size}"
            )
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(values))):
            raise RecordError("positions and values must be finite")
        if np.any(np.diff(positions) <= 0):
            raise RecordError("positions must be strictly increasing")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.positions.size

    @property
    def span(self) -> Tuple[float, float]:
        """First and last position."""
        return float(self.positions[0]), float(self.positions[-1])

    def with_values(self, values: np.ndarray) -> "ProxyRecord":
        """Same positions, new values."""
        return ProxyRecord(self.positions, values, self.scale_kind)


@dataclass(frozen=True)
class TargetEnsemble:
    """Posterior age draws per depth of a target core, plus its proxy values.

    ``draws`` has one row per position and one column per upstream MCMC
    iteration; every column is non-decreasing down the core.
    """

    positions: np.ndarray
    proxy: np.ndarray
    draws: np.ndarray
    dropped: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim != 2 or draws.shape[0] != len(self.positions):
            raise EnsembleError("draws must have one row per position")
        if np.any(np.diff(draws, axis=0) < 0):
            raise EnsembleError("every draw must be non-decreasing with depth")
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "proxy", np.asarray(self.proxy, dtype=float))
        object.__setattr__(self, "draws", draws)

    @property
    def n_draws(self) -> int:
        """Number of retained age draws."""
        return self.draws.shape[1]

    @property
    def age_range(self) -> Tuple[float, float]:
        """Smallest and largest age over every draw."""
        return float(self.draws.min()), float(self.draws.max())

    def median_record(self) -> ProxyRecord:
        """Depth-to-median-age record, used to elicit priors from an ensemble."""
        return ProxyRecord(self.positions, np.median(self.draws, axis=1), ScaleKind.DEPTH)

    def with_proxy(self, proxy: np.ndarray) -> "TargetEnsemble":
        """Same ages, new proxy values."""
        return TargetEnsemble(self.positions, proxy, self.draws, self.dropped)


@dataclass(frozen=True)
class Marginal:
    """Posterior draws of one quantity and its prior log-density, for plot data."""

    name: str
    draws: np.ndarray
    prior_logpdf: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AlignmentResult:
    """Everything a finished alignment writes to disk."""

    chain: Chain
    positions: np.ndarray
    ages: np.ndarray
    input_values: np.ndarray
    target_ages: np.ndarray
    target_values: np.ndarray
    marginals: Tuple[Marginal, ...] = ()
    config_echo: str = ""
    write_ensemble: bool = False
    extra: Dict[str, float] = field(default_factory=dict)


def _read_table(path: Path, error: type) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise error(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True)
    except pd.errors.ParserError as exc:
        raise error(f"{path}: ragged rows ({exc})") from exc
    except pd.errors.EmptyDataError as exc:
        raise error(f"{path}: file is empty") from exc
    if frame.empty:
        raise error(f"{path}: file is empty")
    return frame


def _is_number(text) -> bool:
    try:
        float(text)
    except (TypeError, ValueError):
        return False
    return True


def _drop_header(frame: pd.DataFrame, columns: Sequence[int]) -> Tuple[pd.DataFrame, int]:
    """Removes a header line if the first row is non-numeric in the used columns.

    Returns the frame and the file line number of its first row.
    """
    first = frame.iloc[0, list(columns)]
    if not any(_is_number(cell) for cell in first):
        return frame.iloc[1:].reset_index(drop=True), 2
    return frame, 1


def _numeric(frame: pd.DataFrame, path: Path, first_line: int, error: type) -> np.ndarray:
    values = frame.apply(
        lambda column: pd.to_numeric(column.str.strip(), errors="coerce")
    ).to_numpy(dtype=float)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        row, col = bad[0]
        cell = frame.iat[row, col]
        raise error(
            f"{path}: row {row + first_line}, column {col + 1}: "
            f"non-numeric or missing value {cell!r}"
        )
    return values


def load_record(
    path: Path,
    schema: Sequence[int] = (0, 1),
    scale_kind: ScaleKind = ScaleKind.DEPTH,
) -> ProxyRecord:
    """Loads a (position, value) CSV and returns it sorted by position.

    ``schema`` holds the zero-based column indices of position and value.
    A header line is allowed.
    """
    path = Path(path)
    frame = _read_table(path, RecordError)
    if frame.shape[1] <= max(schema):
        raise RecordError(f"{path}: expected at least {max(schema) + 1} columns")
    frame, first_line = _drop_header(frame, schema)
    values = _numeric(frame.iloc[:, list(schema)], path, first_line, RecordError)
    positions, proxy = values[:, 0], values[:, 1]

    duplicates = pd.Series(positions).duplicated(keep=False).to_numpy()
    if duplicates.any():
        rows: Dict[float, List[int]] = {}
        for index in np.flatnonzero(duplicates):
            rows.setdefault(positions[index], []).append(int(index) + first_line)
        detail = "; ".join(
            f"position {pos:g} at rows {', '.join(map(str, lines))}"
            for pos, lines in rows.items()
        )
        raise RecordError(f"{path}: duplicate positions: {detail}")

    order = np.argsort(positions, kind="stable")
    return ProxyRecord(positions[order], proxy[order], scale_kind)


def load_ensemble(path: Path, min_draws: int = MIN_ENSEMBLE_DRAWS) -> TargetEnsemble:
    """Loads a wide ensemble CSV: depth, proxy, then one column per age draw.

    Draw columns with an age inversion are dropped and logged.
    """
    path = Path(path)
    frame = _read_table(path, EnsembleError)
    if frame.shape[1] < 3:
        raise EnsembleError(f"{path}: expected depth, proxy and at least one draw column")
    frame, first_line = _drop_header(frame, (0, 1))
    values = _numeric(frame, path, first_line, EnsembleError)

    order = np.argsort(values[:, 0], kind="stable")
    values = values[order]
    if np.any(np.diff(values[:, 0]) <= 0):
        raise EnsembleError(f"{path}: duplicate depths")
    draws = values[:, 2:]

    inverted = np.any(np.diff(draws, axis=0) < 0, axis=0)
    dropped = tuple(int(index) for index in np.flatnonzero(inverted))
    for index in dropped:
        logger.warning("%s: dropping draw column %d (age inversion)", path, index)
    kept = draws[:, ~inverted]
    if kept.shape[1] < min_draws:
        raise EnsembleError(
            f"{path}: insufficient ensemble size: {kept.shape[1]} valid draws, "
            f"need at least {min_draws}"
        )
    logger.info("%s: %d draws kept, %d dropped", path, kept.shape[1], len(dropped))
    return TargetEnsemble(values[:, 0], values[:, 1], kept, dropped)


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_record(record: ProxyRecord, path: Path, names: Tuple[str, str] = ("position", "value")) -> None:
    """Writes a record as a two-column CSV with a header."""
    _write_csv(pd.DataFrame({names[0]: record.positions, names[1]: record.values}), Path(path))


def write_ensemble(ensemble: TargetEnsemble, path: Path) -> None:
    """Writes the wide ensemble layout read by ``load_ensemble``."""
    columns = {"depth": ensemble.positions, "proxy": ensemble.proxy}
    columns.update({f"draw_{i + 1}": ensemble.draws[:, i] for i in range(ensemble.n_draws)})
    _write_csv(pd.DataFrame(columns), Path(path))


def write_truth(positions: np.ndarray, ages: np.ndarray, path: Path) -> None:
    """Writes ground-truth ages per position."""
    _write_csv(pd.DataFrame({"position": positions, "age": ages}), Path(path))


def read_truth(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """Reads a truth file written by ``write_truth`` (or any two-column CSV)."""
    record = load_record(path, (0, 1))
    return record.positions, record.values


def _histogram_rows(marginal: Marginal) -> pd.DataFrame:
    draws = np.asarray(marginal.draws, dtype=float).ravel()
    low, high = float(draws.min()), float(draws.max())
    if high <= low:
        pad = max(abs(low) * 1e-3, 1e-9)
        low, high = low - pad, high + pad
    counts, edges = np.histogram(draws, bins=HISTOGRAM_BINS, range=(low, high), density=True)
    centres = 0.5 * (edges[:-1] + edges[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        prior = np.exp(np.asarray(marginal.prior_logpdf(centres), dtype=float))
    return pd.DataFrame(
        {
            "parameter": marginal.name,
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "posterior_density": counts,
            "prior_density": prior,
        }
    )


def write_result(result: AlignmentResult, directory: Path) -> None:
    """Writes chain, ages, diagnostics, config echo and plot data into ``directory``."""
    chain = result.chain
    if len(chain) == 0:
        raise SamplerError("no retained samples")
    directory = Path(directory)
    try:
        (directory / "plotdata").mkdir(parents=True, exist_ok=True)
        _write_result(result, directory)
    except OSError as exc:
        raise OutputError(f"cannot write results to {directory}: {exc}") from exc


def _write_result(result: AlignmentResult, directory: Path) -> None:
    chain = result.chain
    frame = pd.DataFrame(chain.samples, columns=list(chain.names))
    frame["log_objective"] = chain.log_objective
    _write_csv(frame, directory / "chain.csv")

    summary = summarize(result.ages)
    summary.insert(0, "position", result.positions)
    _write_csv(summary, directory / "ages.csv")
    if result.write_ensemble:
        ensemble = pd.DataFrame(
            result.ages, columns=[f"sample_{i + 1}" for i in range(result.ages.shape[1])]
        )
        ensemble.insert(0, "position", result.positions)
        _write_csv(ensemble, directory / "ages_ensemble.csv")

    diagnostics = dict(chain.diagnostics())
    diagnostics.update(result.extra)
    _write_csv(
        pd.DataFrame({"metric": list(diagnostics), "value": list(diagnostics.values())}),
        directory / "diagnostics.csv",
    )
    if result.config_echo:
        (directory / "config.ini").write_text(result.config_echo, encoding="utf-8")

    plotdata = directory / "plotdata"
    _write_csv(
        pd.DataFrame(
            {"sample": np.arange(1, len(chain) + 1), "log_objective": chain.log_objective}
        ),
        plotdata / "trace.csv",
    )
    if result.marginals:
        _write_csv(
            pd.concat([_histogram_rows(m) for m in result.marginals], ignore_index=True),
            plotdata / "prior_posterior.csv",
        )
    _write_csv(
        pd.DataFrame(
            {
                "position": result.positions,
                "age_median": summary["median"],
                "age_lower95": summary["lower95"],
                "age_upper95": summary["upper95"],
                "value": result.input_values,
            }
        ),
        plotdata / "aligned_proxy.csv",
    )
    _write_csv(
        pd.DataFrame({"age": result.target_ages, "value": result.target_values}),
        plotdata / "target_proxy.csv",
    )
    _write_csv(
        summary[["position", "median", "lower95", "upper95"]],
        plotdata / "age_depth.csv",
    )


def _read_result(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise RecordError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.ParserError as exc:
        raise RecordError(f"{path}: ragged rows ({exc})") from exc
    except pd.errors.EmptyDataError as exc:
        raise RecordError(f"{path}: file is empty") from exc
    missing = [name for name in columns if name not in frame.columns]
    if missing:
        raise RecordError(f"{path}: missing column(s) {', '.join(missing)}")
    return frame


def read_chain(path: Path) -> pd.DataFrame:
    """Reads ``chain.csv``; the last column is the log-objective."""
    return _read_result(path, ("log_objective",))


def read_ages(path: Path) -> pd.DataFrame:
    """Reads ``ages.csv``."""
    return _read_result(path, AGES_COLUMNS)


def read_diagnostics(path: Path) -> Dict[str, float]:
    """Reads ``diagnostics.csv`` into a metric -> value mapping."""
    frame = _read_result(path, ("metric", "value"))
    return dict(zip(frame["metric"], frame["value"].astype(float)))


def ensure_matching(positions: np.ndarray, other: np.ndarray, what: Iterable[str]) -> None:
    """Raises ``RecordError`` unless two position vectors coincide."""
    names = list(what)
    if positions.shape != other.shape or not np.allclose(positions, other, rtol=1e-12, atol=1e-9):
        raise RecordError(f"positions of {names[0]} and {names[1]} do not match")


RESULT_FILES: Final[Tuple[str, ...]] = (
    "chain.csv",
    "ages.csv",
    "ages_ensemble.csv",
    "diagnostics.csv",
    "config.ini",
)


def remove_result(directory: Path) -> None:
    """Deletes whatever ``write_result`` may have written into ``directory``."""
    directory = Path(directory)
    for name in RESULT_FILES:
        (directory / name).unlink(missing_ok=True)
    shutil.rmtree(directory / "plotdata", ignore_errors=True)
