class MBSTSError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MBSTSError, ValueError):
    pass


class ValidationError(MBSTSError, ValueError):
    """Invalid configuration, panel, or input file."""


class NumericalError(MBSTSError, ArithmeticError):
    """A quantity that must be positive definite (or finite) was not."""
