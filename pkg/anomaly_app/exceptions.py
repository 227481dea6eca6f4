"""Error hierarchy for the line-scan anomaly toolkit."""


class LinescanError(Exception):
    """Base class for every error raised by anomaly_app"""
    exit_code = 1


class ConfigurationError(LinescanError):
    """Invalid configuration or dimension mismatch"""
    exit_code = 2


class DataFormatError(LinescanError):
    """Malformed or inconsistent data"""
    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeMismatchError(DataFormatError):
    """Companion arrays do not line up"""


class FactorizationError(LinescanError):
    """Cholesky factorization hit a non-positive pivot"""
    exit_code = 3

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SingularSolveError(LinescanError):
    """Triangular solve against a zero diagonal"""
    exit_code = 3


class UpdateInstabilityError(LinescanError):
    """Woodbury update with a vanishing or singular denominator"""
    exit_code = 3


class DegenerateLineError(LinescanError):
    """Line too small for the requested statistic"""
    exit_code = 3


class MetricUndefinedError(LinescanError):
    """Metric cannot be computed for the given scores and labels"""
    exit_code = 4
