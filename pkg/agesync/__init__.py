"""agesync."""
from .config import Configuration, Mode, RunConfig, Strategy, load_config
from .core import RunsManager
from .errors import (
    AgeSyncException,
    ConfigError,
    DataError,
    OutputError,
    RunExistsError,
    SamplerError,
)
from .io import AlignmentResult, ProxyRecord, TargetEnsemble, load_ensemble, load_record, write_result
from .metrics import ScoreCard, score
from .model import AlignmentModel, KdeTable, PriorSpec, TShape, log_posterior
from .pipeline import align, diagnose, evaluate, prepare, simulate
from .sampler import Chain, iat, run_mcmc
from .warp import SectionGrid, WarpParams, make_grid, tau_all

__all__ = (
    "__version__",
    "AgeSyncException",
    "AlignmentModel",
    "AlignmentResult",
    "Chain",
    "ConfigError",
    "Configuration",
    "DataError",
    "KdeTable",
    "Mode",
    "OutputError",
    "PriorSpec",
    "ProxyRecord",
    "RunConfig",
    "RunExistsError",
    "RunsManager",
    "SamplerError",
    "ScoreCard",
    "SectionGrid",
    "Strategy",
    "TShape",
    "TargetEnsemble",
    "WarpParams",
    "align",
    "diagnose",
    "evaluate",
    "iat",
    "load_config",
    "load_ensemble",
    "load_record",
    "log_posterior",
    "make_grid",
    "prepare",
    "run_mcmc",
    "score",
    "simulate",
    "tau_all",
    "write_result",
)

__version__ = "0.1.0"
