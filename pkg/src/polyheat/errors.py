"""Exception and warning types shared across polyheat."""


class PolyheatError(Exception):
    """Base class for all polyheat errors."""


class ValidationError(PolyheatError, ValueError):
    """An input violates a documented precondition."""


class HypothesisError(ValidationError):
    """Data violates the hypothesis of the theorem an experiment checks
    (e.g. nonpositive mass for a positivity scan)."""


class NumericalError(PolyheatError, RuntimeError):
    """A numerical kernel failed to reach its accuracy contract."""


class QuadratureError(NumericalError):
    pass


class DivergenceError(QuadratureError):
    """Integrand tail does not decay (non-coercive symbol)."""


class ResolutionError(NumericalError):
    """Grid refinement limit reached without resolving the kernel."""


class BracketError(NumericalError):
    pass


class ResolutionWarning(UserWarning):
    """The frequency grid under-resolves the propagator kernel."""


class TruncationWarning(UserWarning):
    """Reported modal truncation tail exceeds the warning threshold."""
