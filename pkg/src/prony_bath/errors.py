"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class PronyBathError(Exception):
    """Base class for all package errors."""


class ConfigError(PronyBathError):
    """Invalid configuration, schema violation, or domain error in inputs."""


class NumericalError(PronyBathError):
    """A numerical procedure failed (solver breakdown, non-convergence)."""


class AccuracyError(NumericalError):
    """Refinement exhausted before reaching the requested tolerance.

    Carries the best error estimate reached so callers can decide whether
    the partial result is still usable.
    """

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class DegeneratePolynomialError(NumericalError):
    """All retained polynomial coefficients fell below the trim threshold."""


class UnsupportedDensityError(PronyBathError):
    """The requested operation does not support this spectral density."""
