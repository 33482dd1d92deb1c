"""Exception hierarchy shared by all design and simulation modules."""


class AfRelayError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(AfRelayError, ValueError):
    """Input has the wrong shape, type or structure."""


class DegenerateError(AfRelayError, ArithmeticError):
    """A quantity needed by a design step vanished (zero matrix, zero power)."""


class InfeasibleConstraintError(AfRelayError):
    """A power budget cannot be met by any allocation."""


class SingularMatrixError(AfRelayError, ArithmeticError):
    """A linear system is singular or too badly conditioned to solve."""


class ConfigError(AfRelayError):
    """Malformed experiment configuration."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        prefix = ""
        if source is not None:
            prefix = f"{source}:"
        if line is not None:
            prefix += f"{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class ConvergenceWarning(UserWarning):
    """An iterative kernel hit its iteration cap before converging."""
