"""Exception hierarchy shared by all modules."""


class LindbladModesError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1
    code = "error"


class DimensionMismatchError(LindbladModesError, ValueError):
    exit_code = 2
    code = "dimension-mismatch"


class ConfigError(LindbladModesError, ValueError):
    exit_code = 2
    code = "parse-error"


class InvalidModelError(LindbladModesError, ValueError):
    exit_code = 2
    code = "invalid-model"


class TruncationError(LindbladModesError):
    """Requested truncation is too small for the state or index range."""

    exit_code = 4
    code = "truncation-strict"


class DivergenceError(LindbladModesError):
    """Eigenmode expansion of the initial state does not converge."""

    exit_code = 3
    code = "divergence"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateSpectrumError(LindbladModesError):
    """Two-mode normal-mode splitting vanishes (exceptional point)."""

    exit_code = 5
    code = "degeneracy"


class DimensionCapError(LindbladModesError):
    exit_code = 6
    code = "dimension-cap"


class UnsupportedInitialStateError(LindbladModesError, ValueError):
    exit_code = 2
    code = "unsupported-initial"
