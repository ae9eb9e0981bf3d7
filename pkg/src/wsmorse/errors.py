"""Exception hierarchy shared by all modules."""


class WsMorseError(Exception):
    """Base class for library errors."""


class ValidationError(WsMorseError, ValueError):
    """Bad user input: scenario keys, shapes, parameter ranges."""


class NumericalError(WsMorseError, ArithmeticError):
    """A computation left its regime of validity."""


class SingularMetricError(NumericalError):
    pass


class ChartDomainError(NumericalError):
    pass


class DegenerateTubeError(NumericalError):
    """Raised when the area discriminant is not positive somewhere on a tube."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class CFLError(ValidationError):
    pass


class GaugeDriftError(NumericalError):
    pass


class JacobiOverflowError(NumericalError):
    pass


class GridMismatchError(ValidationError):
    pass


class ConjugateStringError(NumericalError):
    """A conjugate string is present (or absent) where the operation needs the opposite."""


class FrameDegeneracyError(NumericalError):
    pass
