"""Exception types shared across the package."""


class ErlangRError(Exception):
    """Base class for all package-specific errors."""


class DomainError(ErlangRError, ValueError):
    """An input is outside the mathematical domain of the operation."""


class NotStable(ErlangRError):
    """The holding model has no stationary distribution at these parameters."""

    def __init__(self, message: str, rho: float | None = None, rho_max: float | None = None):
        super().__init__(message)
        self.rho = rho
        self.rho_max = rho_max


class InfeasibleTarget(ErlangRError):
    """No capacity pair can reach the requested delay target."""


class NoConvergence(ErlangRError):
    """An iterative solver did not reach its tolerance within the iteration cap."""

    def __init__(self, message: str, iterations: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularSystem(ErlangRError):
    """A linear system that should be solvable turned out singular."""


class ScheduleGap(ErlangRError):
    """A staffing schedule does not cover the requested simulation window."""
