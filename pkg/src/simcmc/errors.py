"""Exception types shared across the package."""


class SimcmcError(Exception):
    """Base class for all library-specific errors."""


class OutOfSupport(SimcmcError):
    """A density that must be positive evaluated to zero."""


class LevelOutOfRange(SimcmcError):
    """A level index fell outside 1..horizon (or 1..frontier)."""


class InitOutOfSupport(SimcmcError):
    """An initial chain state has zero target density at its level."""

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"initial state at level {level} has zero target density")


class ModeMismatch(SimcmcError):
    """An operation needs full stored paths but storage is marginal-only."""


class NoProposalsYet(SimcmcError):
    """Estimates were requested before any proposal was made."""


class Degenerate(SimcmcError):
    """Every particle weight in a population is zero."""


class BadWeights(SimcmcError):
    """A weight vector is negative or not normalized."""


class NumericalFailure(SimcmcError):
    """A linear-algebra step lost positive definiteness."""


class OriginBearing(SimcmcError):
    """Bearing requested for a state sitting exactly at the origin."""


class ZeroMass(SimcmcError):
    """An enumerated unnormalized table sums to zero."""


class LengthMismatch(SimcmcError):
    """Two sequences that must align have different lengths."""
