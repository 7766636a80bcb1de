"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RecoveryError(Exception):
    """Base class for numerical failures raised by this package."""


class ChebyshevPropertyError(RecoveryError):
    """A basis failed the randomized collocation-invertibility self-check."""


class SolverError(RecoveryError):
    """The simplex solver could not produce a basic optimal solution."""


class InfeasibleError(SolverError):
    """The equality constraints admit no solution (rank-deficient collocation)."""


class CyclingError(SolverError):
    """The pivot budget was exhausted."""


class DegenerateError(RecoveryError):
    """A basic solution has a vanishing entry where none is allowed."""


class SubintervalError(RecoveryError):
    """Failure attached to a specific subinterval of the sampling grid."""

    def __init__(self, k: int, message: str):
        super().__init__(f"subinterval {k}: {message}")
        self.k = k
