"""Exception hierarchy shared by every towermon module."""


class TowermonError(Exception):
    """Base class for all errors raised by towermon."""


class ParameterError(TowermonError, ValueError):
    """An argument is outside the range an operation accepts."""


class ConfigurationError(TowermonError):
    """Channel metadata, config files or setups are inconsistent."""


class ParseError(TowermonError):
    """A data file could not be parsed.

    ``line`` is the 1-based line (or row index for catalogs) that failed.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(TowermonError):
    """Input data violates an invariant (overlap, wrong unit, empty input)."""


class InvalidStateError(DataError):
    """Operation not applicable to the current state of the data."""


class InsufficientDataError(TowermonError):
    """Not enough samples, points or time support for a statistic."""
