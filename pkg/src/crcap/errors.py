"""Exception hierarchy shared across the package."""


class CrcapError(Exception):
    """Base class for all package errors."""


class ValidationError(CrcapError, ValueError):
    """Input violates a documented precondition."""


class ConfigError(ValidationError):
    """A configuration is internally inconsistent or too coarse."""


class NumericalError(CrcapError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""
