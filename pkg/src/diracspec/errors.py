"""Exception hierarchy.

The CLI maps these onto exit codes: argument/config problems exit 2,
numerical failures exit 3, invariant violations exit 4.
"""


class DiracSpecError(Exception):
    """Base class for all library errors."""


class ArgumentError(DiracSpecError, ValueError):
    """Invalid argument or configuration value."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ParseError(ArgumentError):
    """Malformed potential expression.

    ``offset`` is the 0-based character offset where parsing failed.
    """

    def __init__(self, message, text, offset):
        self.text = text
        self.offset = offset
        pointer = " " * offset + "^"
        super().__init__(f"{message} at offset {offset}\n  {text}\n  {pointer}")
        self.bare_message = message


class DomainError(DiracSpecError, ArithmeticError):
    """Expression evaluated outside its domain (sqrt/log of a negative, 1/0)."""

    def __init__(self, message, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at x={point}"
        super().__init__(message)


class UnderResolvedGrid(ArgumentError):
    """Grid spacing too coarse for the oscillation scale of a field."""

    def __init__(self, message, required_h):
        super().__init__(message, key="h")
        self.required_h = required_h


class NumericalError(DiracSpecError, RuntimeError):
    """Quadrature or ODE integration failed to converge."""


class QuadratureError(NumericalError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SingularityError(NumericalError):
    """Integration reached the r = 0 singularity or the step size underflowed."""

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


class InvariantViolation(DiracSpecError, RuntimeError):
    """A checked structural invariant (e.g. det of a transfer matrix) drifted."""
