"""Configurations for agesync."""
from __future__ import annotations

import configparser
import dataclasses
import enum
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Final, Iterable, List, Optional, Tuple

import platformdirs

from .errors import ConfigError


class Configuration:
    """Application directories for agesync.

    The data root holds run directories and the run catalog, the log root
    holds one log file per run. ``AGESYNC_HOME`` overrides both.
    """

    ENV_HOME: Final[str] = "AGESYNC_HOME"

    def __init__(
        self,
        app_name: str = "agesync",
        app_author: str = "agesync",
        dir_home: Optional[Path] = None,
    ) -> None:
        if dir_home is None and os.environ.get(self.ENV_HOME):
            dir_home = Path(os.environ[self.ENV_HOME])

        if dir_home is None:
            self.dir_base_data = Path(platformdirs.user_data_dir(app_name, app_author))
            self.dir_base_logs = Path(platformdirs.user_log_dir(app_name, app_author))
        else:
            self.dir_base_data = Path(dir_home)
            self.dir_base_logs = Path(dir_home) / "logs"


class Mode(str, enum.Enum):
    """What the input record's position axis is."""

    AGE_DEPTH = "age-depth"
    AGE_TO_AGE = "age-to-age"


class Strategy(str, enum.Enum):
    """Alignment strategy: one point target, two mixed targets, or a target ensemble."""

    SINGLE = "single"
    DOUBLE = "double"
    UQ = "uq"


@dataclass(frozen=True)
class DataPaths:
    """Input files. Column pairs are zero-based (position, value) indices."""

    input: Optional[Path] = None
    target: Optional[Path] = None
    target2: Optional[Path] = None
    ensemble: Optional[Path] = None
    age_model: Optional[Path] = None
    truth: Optional[Path] = None
    input_columns: Tuple[int, ...] = (0, 1)
    target_columns: Tuple[int, ...] = (0, 1)


@dataclass(frozen=True)
class RescaleOptions:
    """Quantiles mapped onto -1 and +1."""

    q_lower: float = 0.05
    q_upper: float = 0.95


@dataclass(frozen=True)
class PriorOptions:
    """Prior hyperparameters; ``None`` means derived from the data."""

    alpha_shape: float = 1.5
    alpha_mean: Optional[float] = None
    omega_a: float = 5.0
    omega_b: float = 5.0
    tau0_mean: Optional[float] = None
    tau0_sd: Optional[float] = None
    sigma_shape: float = 1.5
    sigma_mean: float = 0.01
    mix_a: float = 1.0
    mix_b: float = 1.0
    taun_mean: Optional[float] = None
    taun_sd: Optional[float] = None


@dataclass(frozen=True)
class LikelihoodOptions:
    """Shape parameters of the alignment t-distribution."""

    t_a: float = 3.0
    t_b: float = 4.0


@dataclass(frozen=True)
class KdeOptions:
    """Windowed kernel density settings for the UQ strategy."""

    n_windows: Optional[int] = None
    min_samples: int = 30
    max_samples: int = 500
    floor: float = -30.0
    min_bandwidth: float = 0.05


@dataclass(frozen=True)
class McmcOptions:
    """Sampler budget. ``burn_in=None`` means 100 * n_params * thinning.

    ``aligned_start`` starts the t-walk from a DTW fit of the input polished
    on the energy; otherwise both points are prior draws.
    """

    n_samples: int = 3000
    thinning: int = 1
    burn_in: Optional[int] = None
    max_init_tries: int = 10_000
    aligned_start: bool = True
    progress: bool = False


@dataclass(frozen=True)
class SyntheticOptions:
    """Simulation study settings used by ``simulate``."""

    a: float = 20.0
    b: float = 250.0
    d: float = 12.0
    x_max: float = 1000.0
    n_points: int = 1000
    weight: float = 0.7
    noise: float = 0.05
    c1: float = 1.0
    c2: float = 0.0
    target_span: float = 45_000.0
    target_resolution: float = 20.0
    ensemble_draws: int = 0
    grid_noise: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.3, 0.5)
    grid_fraction: Tuple[float, ...] = (1.0, 0.75, 0.5, 0.25, 0.1)


@dataclass(frozen=True)
class OutputOptions:
    """Where and what to write."""

    directory: Optional[Path] = None
    write_ensemble: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Complete, validated configuration of one run."""

    mode: Mode = Mode.AGE_DEPTH
    strategy: Strategy = Strategy.SINGLE
    sections: int = 50
    seed: int = 0
    name: Optional[str] = None
    data: DataPaths = field(default_factory=DataPaths)
    rescale: RescaleOptions = field(default_factory=RescaleOptions)
    priors: PriorOptions = field(default_factory=PriorOptions)
    likelihood: LikelihoodOptions = field(default_factory=LikelihoodOptions)
    kde: KdeOptions = field(default_factory=KdeOptions)
    mcmc: McmcOptions = field(default_factory=McmcOptions)
    synthetic: SyntheticOptions = field(default_factory=SyntheticOptions)
    output: OutputOptions = field(default_factory=OutputOptions)

    def __post_init__(self) -> None:
        problems = list(_validate(self))
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_params(self) -> int:
        """Length of the sampled parameter vector."""
        return {
            Strategy.SINGLE: self.sections + 3,
            Strategy.UQ: self.sections + 2,
            Strategy.DOUBLE: self.sections + 4,
        }[self.strategy]

    def require_inputs(self) -> None:
        """Checks that the files needed by the strategy are configured."""
        if self.data.input is None:
            raise ConfigError("data.input is required")
        if self.strategy is Strategy.UQ:
            if self.data.ensemble is None:
                raise ConfigError("strategy 'uq' requires data.ensemble")
        elif self.data.target is None:
            raise ConfigError(f"strategy '{self.strategy.value}' requires data.target")
        if self.strategy is Strategy.DOUBLE and self.data.target2 is None:
            raise ConfigError("strategy 'double' requires data.target2")

    def to_ini(self) -> str:
        """Config echo: an INI text that ``load_config`` turns back into ``self``."""
        parser = configparser.ConfigParser(interpolation=None)
        parser["run"] = {
            key: _format(getattr(self, key))
            for key in ("mode", "strategy", "sections", "seed", "name")
            if getattr(self, key) is not None
        }
        for section in _SECTIONS:
            options = getattr(self, section)
            parser[section] = {
                item.name: _format(getattr(options, item.name))
                for item in dataclasses.fields(options)
                if getattr(options, item.name) is not None
            }
        lines: List[str] = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {value}" for key, value in parser[section].items())
            lines.append("")
        return "\n".join(lines)


_SECTIONS: Final[Tuple[str, ...]] = (
    "data",
    "rescale",
    "priors",
    "likelihood",
    "kde",
    "mcmc",
    "synthetic",
    "output",
)

PRESETS: Final[Dict[str, Tuple[str, ...]]] = {
    # Desk-scale budget for quick runs; not the published settings.
    "desk": ("run.sections=20", "mcmc.n_samples=500", "mcmc.thinning=2"),
    "full": ("mcmc.n_samples=3000", "mcmc.thinning=25"),
}


def _validate(config: RunConfig) -> Iterable[str]:
    if config.sections < 2:
        yield f"run.sections must be >= 2, got {config.sections}"
    q_l, q_u = config.rescale.q_lower, config.rescale.q_upper
    if not 0 <= q_l < q_u <= 1:
        yield f"rescale quantiles must satisfy 0 <= q_lower < q_upper <= 1, got {q_l}, {q_u}"
    if config.mcmc.thinning < 1:
        yield f"mcmc.thinning must be >= 1, got {config.mcmc.thinning}"
    if config.mcmc.n_samples < 1:
        yield f"mcmc.n_samples must be >= 1, got {config.mcmc.n_samples}"
    if config.mcmc.burn_in is not None and config.mcmc.burn_in < 0:
        yield f"mcmc.burn_in must be >= 0, got {config.mcmc.burn_in}"
    priors = config.priors
    for name in ("alpha_shape", "omega_a", "omega_b", "sigma_shape", "sigma_mean", "mix_a", "mix_b"):
        if getattr(priors, name) <= 0:
            yield f"priors.{name} must be positive"
    for name in ("alpha_mean", "tau0_sd", "taun_sd"):
        value = getattr(priors, name)
        if value is not None and value <= 0:
            yield f"priors.{name} must be positive"
    if (priors.taun_mean is None) != (priors.taun_sd is None):
        yield "priors.taun_mean and priors.taun_sd must be given together"
    if config.likelihood.t_a <= 0 or config.likelihood.t_b <= 0:
        yield "likelihood shape parameters must be positive"
    if config.kde.min_samples < 1 or config.kde.max_samples < config.kde.min_samples:
        yield "kde.min_samples must be >= 1 and <= kde.max_samples"
    if config.kde.n_windows is not None and config.kde.n_windows < 1:
        yield "kde.n_windows must be >= 1"
    synthetic = config.synthetic
    if not 0 <= synthetic.weight <= 1:
        yield f"synthetic.weight must lie in [0, 1], got {synthetic.weight}"
    if synthetic.noise < 0:
        yield f"synthetic.noise must be >= 0, got {synthetic.noise}"
    if synthetic.n_points < 4:
        yield "synthetic.n_points must be >= 4"
    for name in ("input_columns", "target_columns"):
        columns = getattr(config.data, name)
        if len(columns) != 2 or len(set(columns)) != 2 or min(columns) < 0:
            yield f"data.{name} must be two distinct non-negative column indices"


def _format(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(item) for item in value)
    return str(value)


def _coerce(raw: str, annotation, where: str):
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        if raw.strip().lower() in ("", "none"):
            return None
        annotation = next(arg for arg in args if arg is not type(None))
        return _coerce(raw, annotation, where)
    if origin in (tuple, Tuple):
        return tuple(
            _coerce(item, args[0], where) for item in raw.split(",") if item.strip()
        )
    text = raw.strip()
    try:
        if annotation is bool:
            lowered = text.lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return lowered in ("true", "yes", "1")
        if annotation is int:
            return int(text)
        if annotation is float:
            return float(text)
        if annotation is Path:
            return Path(text)
        if isinstance(annotation, type) and issubclass(annotation, enum.Enum):
            return annotation(text.lower())
    except ValueError as error:
        raise ConfigError(f"{where}: cannot interpret {text!r}") from error
    return text


def _build(cls, values: Dict[str, str], where: str):
    hints = typing.get_type_hints(cls)
    names = {item.name for item in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {', '.join(sorted(unknown))}")
    return {
        key: _coerce(raw, hints[key], f"{where}.{key}") for key, raw in values.items()
    }


def load_config(
    path: Optional[Path] = None,
    overrides: Iterable[str] = (),
    preset: Optional[str] = None,
) -> RunConfig:
    """Reads an INI config, applies the preset and ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)

    if preset and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    assignments = list(PRESETS[preset]) if preset else []
    assignments.extend(overrides)
    for assignment in assignments:
        key, sep, value = assignment.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value: {assignment!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][option] = value.strip()

    known = {"run", *_SECTIONS}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")

    run_fields = {
        item.name: item for item in dataclasses.fields(RunConfig) if item.name not in _SECTIONS
    }
    run_hints = typing.get_type_hints(RunConfig)
    kwargs = {}
    if parser.has_section("run"):
        for key, raw in parser["run"].items():
            if key not in run_fields:
                raise ConfigError(f"unknown keys in [run]: {key}")
            kwargs[key] = _coerce(raw, run_hints[key], f"run.{key}")
    for section in _SECTIONS:
        if parser.has_section(section):
            cls = run_hints[section]
            kwargs[section] = cls(**_build(cls, dict(parser[section]), section))
    return RunConfig(**kwargs)


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    """Returns a copy of ``config`` with nested ``section__key`` or top-level changes."""
    nested: Dict[str, Dict[str, object]] = {}
    top = {}
    for key, value in changes.items():
        section, sep, option = key.partition("__")
        if sep:
            nested.setdefault(section, {})[option] = value
        else:
            top[key] = value
    for section, values in nested.items():
        top[section] = dataclasses.replace(getattr(config, section), **values)
    return dataclasses.replace(config, **top)
