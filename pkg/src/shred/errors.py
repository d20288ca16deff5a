"""Exception hierarchy shared across the toolkit.

Numerical failures (ill conditioning, divergence, blow-up) are kept
distinct from usage errors so callers can map them to different exit
codes.
"""


class ShredError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ShredError):
    """Bad inputs: shape/layout/config problems detected before any math."""


class NumericalError(ShredError):
    """The math itself failed (instability, singularity, divergence)."""


# -- validation ------------------------------------------------------------

class DimensionMismatch(ValidationError):
    pass


class TooManyModes(ValidationError):
    pass


class UnsupportedBoundaryOperator(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class PathLengthMismatch(ValidationError):
    pass


class CountMismatch(ValidationError):
    pass


class LayoutMismatch(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class StepTooLarge(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class FormatError(ValidationError):
    """A persisted file does not match its documented layout."""


class UnsupportedVersion(FormatError):
    pass


# -- numerical -------------------------------------------------------------

class NonRealField(NumericalError):
    """Synthesis of modal coefficients left a non-negligible imaginary part."""


class BlowUp(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class SingularSystem(IllConditioned):
    """Exactly singular system: the infinite-condition limit of IllConditioned."""

    pass


class Diverged(NumericalError):
    pass
