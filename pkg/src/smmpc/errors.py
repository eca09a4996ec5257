"""Exception hierarchy shared by the package."""


class SmmpcError(Exception):
    """Base class for all package errors."""


class DimensionError(SmmpcError, ValueError):
    """Array shapes do not match the expected dimensions."""


class ConfigError(SmmpcError, ValueError):
    """A configuration value or file is invalid."""


class NumericalError(SmmpcError, ArithmeticError):
    """A numerical precondition (rank, definiteness) failed."""


class ExcitationError(NumericalError):
    """The input signal is not persistently exciting of the required order."""


class DegenerateOrderError(NumericalError):
    """The chosen effective order is too large for the recorded data."""


class InfeasibleError(SmmpcError):
    """The quadratic program was detected to be infeasible."""

    def __init__(self, message, constraints=None):
        super().__init__(message)
        self.constraints = constraints or []


class UnsupportedOperation(SmmpcError, TypeError):
    """The operation is not defined for this kind of object."""
