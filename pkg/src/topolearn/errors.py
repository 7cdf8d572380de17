"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, graphs, shapes)."""


class NumericalError(RuntimeError):
    """Non-finite values or other numerical failures in a computation."""


class TrainingDiverged(NumericalError):
    """Training loss became non-finite; carries the history up to the failure."""

    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = history
