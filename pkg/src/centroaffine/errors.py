"""Exception hierarchy shared by every module of the package."""


class CentroAffineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CentroAffineError, ValueError):
    """Invalid grid resolution or configuration value."""


class DomainError(CentroAffineError, ValueError):
    """Argument outside the domain of an operation (non-unit direction, grid mismatch)."""


class NumericsError(CentroAffineError, ArithmeticError):
    """A computation produced non-finite values."""


class InvalidBody(CentroAffineError):
    """The support field does not describe a body of the smooth, strictly convex class."""


class PolarDegenerate(CentroAffineError):
    """A resampled body (polar, linear image) failed validation."""


class DetNotOne(CentroAffineError, ValueError):
    """A matrix expected in SL(n) has determinant different from one."""


class BadIndex(CentroAffineError, ValueError):
    """An affine index p (or dual index) is excluded."""


class ConvexityLost(CentroAffineError):
    """A flow step left the class of valid bodies."""


class InitialNotContained(CentroAffineError, ValueError):
    """Containment check called with h_in > h_out at some node."""


class CapTooLarge(CentroAffineError, ValueError):
    """Requested cap area is at least half of the body's area."""


class NonConvexCut(CentroAffineError):
    """Per-direction cut field is not a valid support function."""


class GenerationFailed(CentroAffineError):
    """Random generator exhausted its rejection budget."""
