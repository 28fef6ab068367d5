# filename: utils/errors.py
from config import EXIT_CONFIG_ERROR, EXIT_NUMERICAL_GUARD, EXIT_PARTIAL_FAILURE


class RlctLabError(Exception):
    """Base class for every error raised on purpose by this package."""
    exit_code = 1


class ConfigError(RlctLabError):
    """Invalid configuration, CLI arguments or grid ranges."""
    exit_code = EXIT_CONFIG_ERROR


class InvalidDimsError(ConfigError, ValueError):
    """(M, N, H, H0) outside M >= 2, N >= 2, H >= H0 >= 1."""


class ShapeMismatchError(RlctLabError, ValueError):
    pass


class NumericalGuardError(RlctLabError):
    """A computation refused to run because its result would not be trustworthy."""
    exit_code = EXIT_NUMERICAL_GUARD


class InsufficientResolutionError(NumericalGuardError):
    """Fewer usable thresholds than the volume fit needs."""


class DivergenceError(RlctLabError, ArithmeticError):
    """Zero model probability on an outcome the truth supports."""


class PartialFailureError(RlctLabError):
    exit_code = EXIT_PARTIAL_FAILURE


class DataFileError(ConfigError):
    """A dataset, matrix or truth file that cannot be read."""
