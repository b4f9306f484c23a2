"""Failure modes shared across solver modules."""


class BracketNotFound(RuntimeError):
    """No (undershoot, overshoot) amplitude pair exists; typically eps >= eps*."""


class DivergentNormError(ValueError):
    """Requested norm diverges for the profile's tail."""


class InconsistentSolution(RuntimeError):
    """A computed solution violates a structural relation (e.g. energy <= 0)."""


class InternalConsistencyError(RuntimeError):
    """Two independent computation routes disagree beyond tolerance."""


class NotInAsymptoticRegime(RuntimeError):
    """Profile mass too small for the concentration rescaling (eps too large)."""


class IllConditionedFit(ValueError):
    """Fit abscissae span too narrow a range for a power-law estimate."""
