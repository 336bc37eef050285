"""Exception taxonomy shared across the package.

Each class maps to one failure category named in the module contracts;
the CLI translates ConfigurationError to exit code 2 and everything
else to exit code 3.
"""


class FusionAttackError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(FusionAttackError):
    """Invalid or inconsistent configuration values."""


class InputError(FusionAttackError):
    """Malformed runtime input (dimension mismatch, bad class index)."""


class NumericError(FusionAttackError):
    """Non-finite values where finite numbers are required."""


class TrainingError(FusionAttackError):
    """Training cannot proceed (e.g. empty training set)."""


class UnsupportedOperationError(FusionAttackError):
    """Operation not defined for the given model kind."""
