"""Exception hierarchy shared by the library and the CLI."""


class FbmDriftError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FbmDriftError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResolutionError(FbmDriftError, ValueError):
    """A sampled path is too coarse (or misaligned) for the requested evaluation."""


class AlignmentError(FbmDriftError, ValueError):
    """Observation grid points do not coincide with fine-grid points."""


class NumericalError(FbmDriftError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class DegenerateEstimateError(NumericalError):
    """Estimator denominator vanished or a diffusion value was zero."""


class ConfigError(FbmDriftError, ValueError):
    """Malformed or incomplete configuration; ``key`` names the offender."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
