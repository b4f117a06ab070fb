"""Exception types shared across the solver stack."""


class MultibumpError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(MultibumpError):
    """A field contains non-finite entries."""


class GridMismatchError(MultibumpError):
    """Two fields live on different grids."""


class MisalignedTranslationError(MultibumpError):
    """Requested translation is not an exact number of grid points."""


class SingularOperatorError(MultibumpError):
    """A resolvent shift sits at or above the bottom of the spectrum.

    Carries the offending gap (bottom eigenvalue minus shift).
    """

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class AssumptionViolationError(MultibumpError):
    """The discrete operator -Lap + V is not positive definite."""


class LinearSolverError(MultibumpError):
    """An iterative linear solve failed to reach its tolerance."""


class FlowStalledError(MultibumpError):
    """The normalized gradient flow hit its iteration cap.

    Carries the last projected-gradient norm.
    """

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class GluingFailedError(MultibumpError):
    """Newton on the extended Lagrangian diverged."""

    def __init__(self, message, separation=None, residual_history=None):
        super().__init__(message)
        self.separation = separation
        self.residual_history = list(residual_history or [])


class DegenerateSuperpositionError(MultibumpError):
    """The bordered system at the current iterate is numerically singular."""


class NotFreelyNondegenerateError(MultibumpError):
    """The linearized operator has a near-zero eigenvalue; z is undefined."""


class NoInstabilityDetected(MultibumpError):
    """The constrained quotient has no eigenvalue below -tau0.

    Reported, not asserted: it signals that the instability hypotheses
    fail at the given point.  Carries the measured quotient minimum.
    """

    def __init__(self, message, mu=None):
        super().__init__(message)
        self.mu = mu


class PositivityViolationError(MultibumpError):
    """The comparison operator is not positive definite on the tangent space."""


class PreconditionError(MultibumpError):
    """An operation was called outside its documented preconditions."""


class CriticalExponentError(MultibumpError):
    """The exponent sits exactly at the mass-critical value."""


class MassRangeError(MultibumpError):
    """Requested per-bump mass lies outside the family's mass curve."""

    def __init__(self, message, mass_range=None):
        super().__init__(message)
        self.mass_range = mass_range


class ContinuationNeededError(MultibumpError):
    """Direct Newton solve diverged; step the parameter down from a converged point."""


class IntegratorFaultError(MultibumpError):
    """Time integration violated a conservation tolerance."""


class FitRejectedError(MultibumpError):
    """The requested fit window is outside the linear growth regime."""


class ConfigError(MultibumpError):
    """A run configuration is malformed or violates a parse-time invariant."""
