"""Exception hierarchy shared by all rayatlas modules.

Every failure mode that a caller might want to catch has its own class.
Numerical routines attach enough context (potentials, angles, points) to
diagnose a failure without re-running the computation.
"""


class RayatlasError(Exception):
    """Base class for all errors raised by this package."""


class RootSolverDiverged(RayatlasError):
    """Simultaneous root iteration failed to reach the residual target."""


class OutsideDomain(RayatlasError):
    """A conformal coordinate was requested where it is not defined."""


class AngleUnresolved(RayatlasError):
    """Branch tracking could not pick a unique angle candidate."""


class AmbiguousOrder(RayatlasError):
    """Two approximate angles overlap within their error bounds."""


class StepCollapse(RayatlasError):
    """Adaptive step size fell below the floor without meeting the target."""

    def __init__(self, message, potential=None, point=None):
        super().__init__(message)
        self.potential = potential
        self.point = point


class SideRequired(RayatlasError):
    """A smooth trace hit a critical point of the potential; the caller
    must re-request the trace with an explicit side."""

    def __init__(self, message, potential=None, point=None):
        super().__init__(message)
        self.potential = potential
        self.point = point


class BisectionFailed(RayatlasError):
    """A bracketing search lost its bracket or exhausted its budget."""


class CurveNotClosed(RayatlasError):
    """An equipotential trace failed to return to its starting point."""


class SeedEscapes(RayatlasError):
    """The component seed escapes; it does not mark a bounded component."""


class NoPolynomialLikeRestriction(RayatlasError):
    """No potential level yields the requested polynomial-like degree."""


class MismatchBeyondTolerance(RayatlasError):
    """Pushforward of an interval system disagrees with the next level."""


class FixedAngleNotInI(RayatlasError):
    """No fixed angle of the power map lies in the computed angle set."""


class LevelConstructionFailed(RayatlasError):
    """An interval-system level could not be built consistently."""


class OutsideI(RayatlasError):
    """An angle lies outside the angle set of the tracked component."""


class InconsistentPortrait(RayatlasError):
    """Orbit portrait data fails a structural requirement."""


class InvalidChoices(RayatlasError):
    """A surgery model's wake choices violate the disjointness rules."""


class VerificationFailed(RayatlasError):
    """A polynomial does not realize the combinatorics of a model.

    Carries the full check report so a caller can inspect which
    properties failed without re-running the traces."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NoRotationMatches(RayatlasError):
    """Two semiconjugacy tables differ by no admissible rotation."""
