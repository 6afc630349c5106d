"""Defines all exceptions in the package."""


class BFBaseException(Exception):
    """Base class for all exceptions in the package"""


class BFInvalidParameter(BFBaseException):
    """Raised if a parameter or configuration value is invalid."""


class BFNumericalError(BFBaseException):
    """Raised if a computation produced a non-finite value or violated an invariant."""


class BFConvergenceError(BFNumericalError):
    """Raised if an iterative solver did not converge.

    The residual history is kept on the exception so that callers can report it.
    """

    def __init__(self, msg: str, residuals: list[float] | None = None) -> None:
        super().__init__(msg)
        self.residuals = residuals or []


class BFFrozenSystem(BFBaseException):
    """Raised if a single-mode system is asked to move."""


class BFInsufficientData(BFBaseException):
    """Raised if a series is too short for a meaningful estimate."""


class BFProfileError(BFBaseException):
    """Raised if a spatial profile does not have the expected shape."""


class BFFileExists(BFBaseException):
    """Raised if the file already exists."""


class BFIOError(BFBaseException):
    """Raised if results cannot be read or written."""
