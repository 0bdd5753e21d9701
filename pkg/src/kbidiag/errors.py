"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand dimensions do not match the operator."""


class InvalidInput(ValueError):
    """Input violates a documented precondition."""


class StateError(RuntimeError):
    """Operation invoked in a state that does not allow it."""


class ConvergenceError(RuntimeError):
    """An iteration failed to converge within its budget.

    Carries the best estimate reached so callers can still inspect it.
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
