"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""


class AccuracyError(ValidationError):
    """Requested evaluation lies outside the accuracy envelope of a method."""


class CancellationError(ConvergenceError):
    """Estimated relative error grew past the monitored threshold."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
