"""Shared exception types."""


class ConfigurationError(ValueError):
    """A request that is malformed or inconsistent with the model setup."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class UnsupportedProblemError(RuntimeError):
    """A reference solution or task regime is not available for this family."""
