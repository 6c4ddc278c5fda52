from __future__ import annotations


class SubdiffError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SubdiffError, ValueError):
    """An input parameter is outside its admissible range."""


class ConvergenceError(SubdiffError, RuntimeError):
    """An iterative procedure failed to converge."""


class SolverError(SubdiffError, RuntimeError):
    """A time step or linear solve failed.

    .. attribute:: step

        Index of the failing time level, if known.
    """

    def __init__(self, message: str, step: int | None = None) -> None:
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class ThresholdError(ParameterError):
    """The step size exceeds the threshold required by the Gronwall bound."""
