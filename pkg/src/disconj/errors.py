"""Exception hierarchy shared by all modules."""


class DisconjError(Exception):
    """Base class for errors raised by this package."""


class ExprError(DisconjError):
    """Malformed or unusable expression."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprDomainError(ExprError, ArithmeticError):
    """Expression is undefined at the requested point."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NotDifferentiableError(ExprError):
    pass


class IntegrationError(DisconjError):
    """The ODE integrator could not continue (step underflow, blow-up)."""


class QuadratureError(DisconjError):
    pass


class PreconditionError(DisconjError):
    """An operation was called outside its domain of validity."""


class NotDisconjugateError(PreconditionError):
    """Raised when an operation needs disconjugacy and the oracle refutes it."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class SoundnessViolation(DisconjError):
    """A sufficient criterion claimed disconjugacy that the oracle refutes."""
