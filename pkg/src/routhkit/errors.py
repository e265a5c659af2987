"""Exception types shared across the package.

The CLI maps these onto stable exit codes: configuration errors exit 2,
chart/domain errors exit 3, consistency errors exit 4, convergence
failures exit 5.
"""


class RouthkitError(Exception):
    """Base class for all package errors."""


class ConfigError(RouthkitError):
    """Malformed or inconsistent run configuration."""


class InvalidParams(RouthkitError):
    """Physical parameters violate their invariants."""


class ChartBoundary(RouthkitError):
    """Evaluation requested within the guard distance of the chart boundary."""


class NotPositiveDefinite(RouthkitError):
    """Kinetic matrix is not symmetric positive definite."""


class SingularReducedMass(RouthkitError):
    """Reduced mass matrix could not be inverted."""


class OffSurface(RouthkitError):
    """Point violates the ellipsoid constraint beyond tolerance."""


class TangencyViolation(RouthkitError):
    """Velocity is not tangent to the constraint surface."""


class NonPositiveFactor(RouthkitError):
    """Time-change density must be strictly positive along the trajectory."""


class MomentumMismatch(RouthkitError):
    """Trajectory metadata carries a different momentum value than requested."""


class GridMismatch(RouthkitError):
    """Sample grid does not cover the requested interval."""


class SpanTooShort(RouthkitError):
    """Trajectory does not span enough time for the requested check."""


class StepFailure(RouthkitError):
    """Integrator step size underflowed or produced non-finite values."""


class MaxStepsExceeded(RouthkitError):
    """Integrator exceeded its step budget."""


class NoConvergence(RouthkitError):
    """Iterative solver failed to reach its tolerance."""
