"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ChambercutError(Exception):
    """Base class for all package errors."""


class ParseError(ChambercutError, ValueError):
    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.position = position
        self.text = text
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class DimensionError(ChambercutError, ValueError):
    pass


class NonSquareSystem(ChambercutError, ValueError):
    pass


# Numerical failures ----------------------------------------------------------

class NoConvergence(ChambercutError):
    pass


class SingularJacobian(ChambercutError):
    pass


class EvaluationError(ChambercutError):
    """A function evaluation is undefined or untrustworthy at the requested point.

    Path trackers treat these as a failed step rather than a fatal error.
    """


class PathFailure(EvaluationError):
    pass


class PointOnHypersurface(EvaluationError):
    pass


class TCollision(EvaluationError):
    pass


class EvaluationGap(EvaluationError):
    pass


class ExtraFactorZero(EvaluationError):
    pass


class RealityError(EvaluationError):
    """Imaginary residue of a quantity that must be real exceeded its tolerance."""


class WitnessSetError(ChambercutError):
    pass


class EmptyWitnessSet(WitnessSetError):
    pass


class NonUniformClusters(WitnessSetError):
    pass


class NonReducedWitnessSet(WitnessSetError):
    pass


class RoutingError(ChambercutError):
    pass


class CountUnavailable(ChambercutError):
    """A root count is undefined at the sample (e.g. a positive-dimensional fibre)."""
