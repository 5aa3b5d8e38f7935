"""Exception types shared across the package."""


class GrnmfError(Exception):
    """Base class for all package errors."""


class DomainError(GrnmfError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionMismatch(GrnmfError, ValueError):
    """Matrix shapes are incompatible for the requested operation."""


class ParseError(GrnmfError, ValueError):
    """A file could not be parsed in one of the supported formats."""


class ConfigurationError(GrnmfError, ValueError):
    """A configuration value or combination of values is invalid."""


class NumericalFailure(GrnmfError, RuntimeError):
    """The iteration produced a non-finite objective value."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
