"""Exception and warning types shared across the package."""


class ReactiveRxError(Exception):
    """Base class for all package errors."""


class ParameterError(ReactiveRxError, ValueError):
    """Invalid channel parameters.

    ``violations`` holds every invariant that failed, not only the first.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [message])


class GeometryError(ParameterError):
    pass


class DomainError(ParameterError):
    pass


class NonFiniteError(ParameterError):
    pass


# specfun uses this name for non-finite arguments
NonFiniteInput = NonFiniteError


class DegenerateRoots(ReactiveRxError):
    """Two or more roots of the cubic coincide; closed form is unusable."""

    def __init__(self, message, roots=None):
        super().__init__(message)
        self.roots = roots


class ImaginaryLeak(ReactiveRxError):
    """The W-term sum kept a non-negligible imaginary part."""


class RangeError(ReactiveRxError):
    """A probability fell outside [0, 1] beyond round-off."""


class BranchError(ReactiveRxError):
    """A Laplace argument lies on the branch cut of sqrt(s + k_d)."""


class ContourError(ReactiveRxError):
    """A Laplace evaluator returned non-finite values on the inversion contour."""


class ConvergenceWarning(UserWarning):
    """Node-doubling self-check of the Laplace inversion disagreed."""


class QuadratureError(ReactiveRxError):
    pass


class InvariantBreach(ReactiveRxError):
    """Particle simulator reached a state that violates its invariants."""


class GridMismatch(ReactiveRxError):
    pass


class ConfigError(ReactiveRxError):
    pass
