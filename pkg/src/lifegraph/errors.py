"""Exception and warning types shared across lifegraph."""


class LifegraphError(Exception):
    """Base class for all lifegraph errors."""


class ConfigError(LifegraphError, ValueError):
    """Invalid pipeline configuration or command-line arguments."""


class DataError(LifegraphError, ValueError):
    """Input data violates a documented contract."""


class CalendarFormatError(DataError):
    """Malformed calendar CSV; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(LifegraphError, ArithmeticError):
    """A numerical routine failed (non-convergence, divergence, non-finite values)."""


class ConvergenceError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SeparationError(NumericalError):
    def __init__(self, message, column=None, diagnostics=None):
        super().__init__(message)
        self.column = column
        self.diagnostics = diagnostics or {}


class DataWarning(UserWarning):
    """Recoverable data issue (clamped counts, dropped constant covariates)."""
