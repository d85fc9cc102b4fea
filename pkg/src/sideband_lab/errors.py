"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 2),
numerical failures from :class:`NumericalError` (CLI exit code 3).
"""


class SidebandLabError(Exception):
    pass


class ValidationError(SidebandLabError, ValueError):
    pass


class NumericalError(SidebandLabError, ArithmeticError):
    pass


class ParameterError(ValidationError):
    """Invalid physical parameter; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NonPositiveFrequency(ParameterError):
    pass


class NegativeOccupancy(ParameterError):
    pass


class TooManyModes(ParameterError):
    pass


class NoReadoutMode(ParameterError):
    pass


class RegimeViolation(ValidationError):
    pass


class StepTooLarge(ValidationError):
    pass


class WindowOutOfRange(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class SystemTooLarge(ValidationError):
    pass


class SingularResponse(NumericalError):
    pass


class UnstableSystem(NumericalError):
    pass


# zeta_analytic raises this name; same condition as UnstableSystem
UnstableRegime = UnstableSystem


class RootFindingFailure(NumericalError):
    pass


class PeakNotFound(NumericalError):
    pass


class FitDiverged(NumericalError):
    pass


class NegativeSpectrum(NumericalError):
    pass


class RegimeWarning(UserWarning):
    """Advisory: parameters outside the weak-coupling / resolved-sideband regime."""
