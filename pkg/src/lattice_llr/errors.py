"""Exception types raised across the package."""


class LatticeLLRError(Exception):
    """Base class for all package errors."""


class DataError(LatticeLLRError):
    """Input data is malformed or does not cover the lattice."""


class MissingSite(DataError):
    pass


class DuplicateSite(DataError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class NonFiniteValue(DataError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedMoment(LatticeLLRError, ValueError):
    pass


class ZeroDensity(LatticeLLRError, ValueError):
    pass


class LagOutOfMargin(LatticeLLRError, ValueError):
    pass


class DegenerateSignal(LatticeLLRError, ValueError):
    pass


class InsufficientReplications(LatticeLLRError):
    pass


class ConfigError(LatticeLLRError, ValueError):
    pass
