"""Exception taxonomy shared by all modules.

Two broad classes matter for the CLI exit codes: precondition violations
(exit 2) and precision exhaustion (exit 3).  Everything derives from
``CircleRenormError`` so library users can catch one base type.
"""


class CircleRenormError(Exception):
    """Base class for all package errors."""


class PreconditionError(CircleRenormError):
    """An operation was invoked outside its contract (CLI exit code 2)."""


class PrecisionExhausted(CircleRenormError):
    """The working precision cannot support the requested computation (exit 3)."""


# -- numerics ---------------------------------------------------------------

class EmptyExpansion(PreconditionError):
    """Continued fraction has no digits to operate on."""


class NoSignChange(PreconditionError):
    """Bisection endpoints do not bracket a sign change / predicate flip."""


class DegenerateInterval(PreconditionError):
    """Interpolation interval is below the precision floor."""


class NonPositiveData(PreconditionError):
    """Decay fitting requires strictly positive data."""


# -- circle maps ------------------------------------------------------------

class RationalLock(CircleRenormError):
    """The orbit locked onto (or indistinguishably near) a periodic cycle.

    ``digits`` holds the continued-fraction digits extracted before the lock
    was detected; they describe the rational/locked rotation number.
    """

    def __init__(self, message, digits=()):
        super().__init__(message)
        self.digits = tuple(digits)


class CriticalCollisionWarning(UserWarning):
    """Two critical points coincided to tolerance and were merged."""


# -- pairs ------------------------------------------------------------------

class DepthUnavailable(PreconditionError):
    """Not enough rotation digits are available for the requested level."""


class BoundaryHit(CircleRenormError):
    """An iterate landed on 0 to working precision (rational rotation number)."""


class NonRenormalizable(CircleRenormError):
    """The pair has no finite height / renormalization is undefined."""


class CriticalGluePoint(PreconditionError):
    """The gluing point is a critical point of xi."""


class EvaluationOverflow(CircleRenormError):
    """A complex evaluation left the precomputed safety region."""


# -- partitions -------------------------------------------------------------

class CombinatorialMismatch(PreconditionError):
    """Two maps disagree combinatorially at the requested partition depth."""


# -- model family -----------------------------------------------------------

class TargetUnreachable(CircleRenormError):
    """The signature solver stalled above the requested tolerance."""


class DegenerateSignature(PreconditionError):
    """Target deltas touch the boundary of the simplex."""


# -- almost commuting -------------------------------------------------------

class CriticalCrowding(PreconditionError):
    """A composition factor contains more than one critical point."""


class MonotonicityBroken(CircleRenormError):
    """A perturbed branch stopped being increasing on its interval."""


# -- experiments ------------------------------------------------------------

class SignatureMismatch(PreconditionError):
    """The two experiment maps do not have matching signatures."""
