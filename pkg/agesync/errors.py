"""Exceptions for agesync."""


class AgeSyncException(Exception):
    """Base class for exceptions in agesync."""

    exit_code: int = 4


class ConfigError(AgeSyncException):
    """The run configuration is invalid or incomplete."""

    exit_code = 2


class RunExistsError(ConfigError):
    """A run with this name already exists."""


class DataError(AgeSyncException):
    """Input data cannot be used."""

    exit_code = 3


class RecordError(DataError):
    """A proxy record file is malformed or violates its invariants."""


class EnsembleError(DataError):
    """A target ensemble file is malformed or too small."""


class DegenerateDataError(DataError):
    """Data carry no spread, e.g. a constant proxy series."""


class SupportError(DataError):
    """An age or position falls outside the range it must lie in."""


class SamplerError(AgeSyncException):
    """The MCMC run could not be carried out."""

    exit_code = 4


class InitializationError(SamplerError):
    """No valid pair of starting points was found."""


class OutputError(AgeSyncException):
    """Results cannot be written."""

    exit_code = 4
