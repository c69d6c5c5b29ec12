"""Exception types shared across the library.

Every error raised on a user-facing path derives from ``StreamHmmError`` so
callers (notably the command line front end) can map failures to exit codes
without matching on message strings.
"""


class StreamHmmError(Exception):
    """Base class for all library errors."""


class ConfigError(StreamHmmError, ValueError):
    """A configuration document is malformed or inconsistent."""


class NonFiniteObservationError(StreamHmmError, ValueError):
    """An observation was NaN or infinite."""


class DegenerateLikelihoodError(StreamHmmError, ArithmeticError):
    """Every branch candidate has zero likelihood at some step.

    Carries the time index at which filtering became degenerate.
    """

    def __init__(self, t: int, message: str | None = None):
        self.t = t
        super().__init__(message or f"all candidate weights vanished at t={t}")


class CholeskyBreakdownError(StreamHmmError, ArithmeticError):
    """A Gram matrix stayed non positive definite after jitter escalation.

    Carries the largest jitter that was attempted.
    """

    def __init__(self, jitter: float, message: str | None = None):
        self.jitter = jitter
        super().__init__(
            message
            or f"Cholesky factorization failed with jitter up to {jitter:g}"
        )


class EnumerationSizeError(StreamHmmError, ValueError):
    """A brute-force enumeration would exceed its hard cap."""


class QuadratureError(StreamHmmError, ArithmeticError):
    """A numerical integral could not be evaluated."""
