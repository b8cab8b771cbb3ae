"""Exception hierarchy.

Validation problems subclass :class:`ValueError`; numerical failures subclass
:class:`ArithmeticError`. The CLI maps the two families onto exit codes 2 and 3.
"""


class ReturnTimeError(Exception):
    """Base class for all package errors."""


class ValidationError(ReturnTimeError, ValueError):
    """Bad input: malformed files, out-of-range parameters, unknown nodes."""


class GraphFormatError(ValidationError):
    """An edge list could not be parsed. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class NumericalError(ReturnTimeError, ArithmeticError):
    """Base class for numerical failures."""


class SingularSystemError(NumericalError):
    """A linear system over series or duals had no usable pivot."""


class SingularNeighbourhoodError(SingularSystemError):
    """Walk sums diverge at z=1, typically because a neighbourhood covers the graph."""


class ConvergenceError(NumericalError):
    """A fixed-point iteration did not converge within its budget."""

    def __init__(self, message, residual=None, sweeps=None):
        super().__init__(message)
        self.residual = residual
        self.sweeps = sweeps
