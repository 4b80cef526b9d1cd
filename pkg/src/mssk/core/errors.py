class MsskError(Exception):
    """Base class for every error raised by mssk."""


class ConfigError(MsskError):
    """Config document missing, unreadable or inconsistent."""


class ValidationError(MsskError, ValueError):
    """An input violates a model or trial-space constraint."""


class NonMonotoneZeta(ValidationError):
    pass


class NonMonotoneGamma(ValidationError):
    pass


class DepthMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NTooLarge(ValidationError):
    pass


class InvalidZeta(ValidationError):
    pass


class WidthTooSmall(ValidationError):
    pass


class CascadeTooLarge(ValidationError):
    pass


class NonMonotoneProfile(ValidationError):
    pass


class DuplicateXi(ValidationError):
    pass


class NonMonotoneQ(ValidationError):
    pass


class EndpointViolation(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class UnknownTestFunction(ValidationError):
    pass


class MismatchedParams(ValidationError):
    pass


class InfeasibleStart(ValidationError):
    pass


class NumericalError(MsskError, ArithmeticError):
    """Evaluation could not produce a finite number."""


class DivergentTerminal(NumericalError):
    pass


class NumericOverflow(NumericalError):
    pass


class UnsupportedTerminal(NumericalError):
    pass


class BudgetExhausted(MsskError):
    """Optimizer stopped on its evaluation budget before converging."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class CheckFailed(MsskError):
    """A statistical acceptance check did not hold."""


class ArtifactConflict(ConfigError):
    """An artifact for this config hash exists with different content."""
