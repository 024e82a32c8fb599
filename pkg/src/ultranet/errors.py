"""Exception hierarchy shared by all ultranet modules."""


class UltranetError(Exception):
    """Base class for every error raised by the library."""


class DomainError(UltranetError, ValueError):
    """A region, point or support lies outside the admissible domain."""


class UnsupportedOrderError(UltranetError, ValueError):
    """A derivative order exceeds the configured maximum."""


class InvalidNetError(UltranetError, ValueError):
    """A net has non-finite or otherwise malformed samples."""


class IncompatibilityError(UltranetError, ValueError):
    """Two objects do not share a grid, ladder or Gevrey order."""


class AliasingError(UltranetError, ValueError):
    """A frequency cutoff reaches the Nyquist limit of its grid."""


class ConstructionError(UltranetError, RuntimeError):
    """A mollifier failed its moment or plateau checks."""

    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class UnderdeterminedFitError(UltranetError, RuntimeError):
    """Too few usable spectral samples to fit the decay model."""


class PreconditionError(UltranetError, ValueError):
    """An operation was called outside its documented preconditions."""


class InvalidOperatorError(UltranetError, ValueError):
    """Ultradifferential coefficients violate their Gevrey bound."""


class WraparoundError(UltranetError, ValueError):
    """A support comes too close to the periodic boundary."""


class SeparationError(UltranetError, RuntimeError):
    """No admissible dilation of a cone pair exists inside the target cone."""

    def __init__(self, message, witness_bin=None):
        super().__init__(message)
        self.witness_bin = witness_bin


class ConfigError(UltranetError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
