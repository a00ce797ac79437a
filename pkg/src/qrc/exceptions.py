"""Exception hierarchy shared by all qrc modules."""


class QRCError(Exception):
    """Base class for every error raised by qrc."""


class DimensionError(QRCError, ValueError):
    """Array shapes or qubit counts are incompatible."""


class DomainError(QRCError, ValueError):
    """A scalar argument lies outside its admissible range."""


class ValidationError(QRCError, ValueError):
    """Input data fails a structural check (non-finite, non-unitary, ...)."""


class ParameterError(QRCError, ValueError):
    """A configuration parameter is invalid."""


class UnderdeterminedError(QRCError, ValueError):
    """Least-squares system has fewer rows than columns."""


class UndefinedMeasureError(QRCError, ValueError):
    """A metric is undefined for the given data (zero variance, zero norm)."""


class DivergenceError(QRCError, ArithmeticError):
    """A recursion or closed-loop run left its bounded region."""


class NumericalError(QRCError, ArithmeticError):
    """A linear-algebra routine failed."""


class InvariantError(QRCError, AssertionError):
    """A physical or algebraic invariant is violated.

    ``invariant`` names the violated property so that callers (and the
    ``validate`` command) can report it.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
