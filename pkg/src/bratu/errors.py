"""Exception types raised by the bratu package."""


class BratuError(Exception):
    """Base class for all package errors."""


class DomainError(BratuError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class SingularMatrix(BratuError, ArithmeticError):
    """A linear system could not be solved because a pivot vanished."""


class ConvergenceFailure(BratuError):
    """An iterative eigen-solver failed to converge."""


class QuadratureFailure(BratuError):
    """Adaptive quadrature exceeded its refinement depth."""


class DiscreteOverflow(BratuError, ArithmeticError):
    """The nonlinear term exp(u) is not representable for the given state."""


class NoConvergence(BratuError):
    """Newton's method did not reach tolerance within the iteration budget."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class StepFailure(BratuError):
    """Continuation step size fell below the configured minimum."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class BracketLost(BratuError):
    """Critical-point refinement could not re-converge inside its bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
