"""Exception hierarchy shared across the package."""


class QFilterError(Exception):
    """Base class for all errors raised by qfilterlab."""


class NonSquare(QFilterError, ValueError):
    pass


class ShapeMismatch(QFilterError, ValueError):
    pass


class EmptyInput(QFilterError, ValueError):
    pass


class ConvergenceFailure(QFilterError, ArithmeticError):
    pass


class Overflow(QFilterError, ArithmeticError):
    pass


class BadShape(QFilterError, ValueError):
    pass


class BadEta(QFilterError, ValueError):
    pass


class NonHermitianH(QFilterError, ValueError):
    pass


class NotADensityMatrix(QFilterError, ValueError):
    pass


class NumericalFailure(QFilterError, ArithmeticError):
    """Raised when a filter step cannot be carried out."""


class StepTooLarge(NumericalFailure):
    pass


class JumpFromDarkState(NumericalFailure):
    """A jump was recorded while the filter assigns it zero intensity."""

    def __init__(self, message, step=None, branch=None):
        super().__init__(message)
        self.step = step
        self.branch = branch


class GridMisaligned(QFilterError, ValueError):
    pass


class ConfigError(QFilterError, ValueError):
    pass
