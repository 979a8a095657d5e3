"""Exception hierarchy. Each CLI-facing error carries the process exit code."""


class PersuasionError(Exception):
    exit_code = 1


class InputError(PersuasionError, ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad barycenter, ...)."""

    exit_code = 2


class ScenarioParseError(InputError):
    exit_code = 2


class PreconditionError(PersuasionError):
    """The scenario does not meet the requirements of the requested command."""

    exit_code = 2


class UnsupportedChainError(PersuasionError):
    """Reducible or periodic transition matrix."""

    exit_code = 3


class UnsupportedDimensionError(PersuasionError):
    exit_code = 2


class NonConvergenceError(PersuasionError):
    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainError(PersuasionError):
    """Point lies outside the region where a closed form is available."""


class ConsistencyError(PersuasionError):
    """An internal invariant failed (e.g. empty contact set, bad certificate)."""
