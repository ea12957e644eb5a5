"""Exception types shared across the package."""


class UnsupportedLossError(ValueError):
    """An operation was requested for a loss that does not meet its
    admissibility conditions (e.g. a maxbias probe with an unbounded loss,
    or an influence function for a loss without bounded derivatives)."""


class NumericFailureError(RuntimeError):
    """A numeric verification step failed beyond its tolerance, e.g. the
    operator residual of an influence-function solve."""


class ConvergenceWarning(UserWarning):
    """A solver returned without reaching its convergence criterion."""
