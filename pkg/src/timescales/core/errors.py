"""Exception types shared by all engines."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure (CLI exit code 3)."""


class BlowupError(NumericalError):
    """Non-finite values or an unphysically large step."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class StiffnessError(NumericalError):
    """Adaptive step size fell below the allowed minimum."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class SingularMatrixError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class BracketError(ValueError):
    """Root bracket without a sign change."""
