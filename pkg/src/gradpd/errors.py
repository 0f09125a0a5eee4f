"""Exception types raised across the package."""


class GradPDError(Exception):
    """Base class for all package errors."""


class DomainError(GradPDError, ValueError):
    """A point (or finite-difference stencil) lies outside the field domain."""


class DegenerateDeformationError(GradPDError, ValueError):
    """det F (or det C) is non-positive or numerically zero."""


class UnsupportedOrderError(GradPDError, ValueError):
    """A derivative or recursion order outside the supported range."""


class SingularPairError(GradPDError, ValueError):
    """Two interacting points coincide in the current placement."""


class InsufficientDataError(GradPDError, ValueError):
    """A convergence study was given too few refinement levels."""


class SkinEffectError(GradPDError, ValueError):
    """An evaluation point is closer than one horizon to the body boundary."""


class DivergenceError(GradPDError, FloatingPointError):
    """Time integration produced non-finite state."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state after step {step}")


class ConfigError(GradPDError, ValueError):
    """Invalid scenario configuration."""


class StabilityWarning(UserWarning):
    """Emitted when no stable time step can be estimated."""


class TruncatedSupportWarning(UserWarning):
    """Emitted when a kernel support ball leaves the field domain."""
