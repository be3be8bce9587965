"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class UnsupportedError(NotImplementedError):
    """The requested operation is not defined for this input (e.g. unbounded set)."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to meet its tolerance.

    The last residual is kept on the instance so callers can log it.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
