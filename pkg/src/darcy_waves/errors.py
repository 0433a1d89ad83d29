"""Exception hierarchy shared by the solver modules."""


class DarcyWavesError(Exception):
    """Base class for all package errors."""


class PreconditionError(DarcyWavesError, ValueError):
    """An input violates an operation's documented precondition."""


class BottomCollisionError(DarcyWavesError):
    """The surface reaches (or comes closer than the clearance floor to) the bottom."""

    def __init__(self, message: str, clearance: float):
        super().__init__(message)
        self.clearance = clearance


class SolverError(DarcyWavesError):
    """An iterative solve failed; ``residual`` holds the last residual norm."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0, ratio=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.ratio = ratio
