"""Exception types raised across the package."""


class BschError(Exception):
    """Base class for all package errors."""


class DomainError(BschError, ValueError):
    """A singular potential was evaluated outside its open domain."""


class ConvergenceError(BschError, RuntimeError):
    """A scalar root solve exhausted its iteration budget."""


class DimensionError(BschError, ValueError):
    """Field shape does not match the owning grid."""


class MissingPrev(BschError, ValueError):
    """Viscous chemistry requested without a previous state or time step."""


class NewtonDivergence(BschError, RuntimeError):
    """Newton iteration failed to reach tolerance within its budget."""


class SeparationBreach(BschError, RuntimeError):
    """A Newton trial left the separation guard even after full backtracking."""


class LinearBreakdown(NewtonDivergence):
    """Iterative linear solver stagnated."""


class Aborted(BschError, RuntimeError):
    """Time loop reached the minimum admissible step size."""


class InsufficientData(BschError, ValueError):
    """Not enough usable samples for a fit."""


class KindMismatch(BschError, ValueError):
    """Operation requires a different potential kind."""
