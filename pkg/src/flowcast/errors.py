"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (CSV layout, checkpoints, ranges)."""


class NumericError(ArithmeticError):
    """Non-finite values encountered where finite arithmetic is required."""


class UsageError(Exception):
    """Invalid command-line invocation or configuration."""
