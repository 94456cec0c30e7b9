"""Exception hierarchy shared across the package."""


class SpdError(Exception):
    """Base class for all package errors."""


class ConstructionError(SpdError, ValueError):
    """Invalid interval, partition, density or moment specification."""


class DomainError(SpdError, ValueError):
    """Evaluation point lies outside the support."""


class InfeasibleError(SpdError, ValueError):
    """Requested moments cannot be attained on the interval."""


class SingularityError(SpdError, ArithmeticError):
    """Multiplier polynomial reached 1, where the parametric density blows up."""

    def __init__(self, x, value):
        super().__init__(f"multiplier polynomial is {value!r} >= 1 at x={x!r}")
        self.x = x
        self.value = value


class NegativityError(SpdError, ArithmeticError):
    """Multiplier polynomial is negative, giving a negative density."""

    def __init__(self, x, value):
        super().__init__(f"multiplier polynomial is {value!r} < 0 at x={x!r}")
        self.x = x
        self.value = value


class SolverError(SpdError, RuntimeError):
    """The optimizer hit a non-finite objective or constraint value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class UnsupportedOperationError(SpdError, NotImplementedError):
    """Operation is not defined for this distribution kind."""
