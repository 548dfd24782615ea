"""Exception and warning types raised by curvfunc."""


class CurvfuncError(Exception):
    """Base class for all curvfunc errors."""


class GridError(CurvfuncError, ValueError):
    """Invalid grid or chart parameters."""


class MetricError(CurvfuncError, ValueError):
    """A symmetric tensor that should be a metric is not positive definite."""


class PreconditionError(CurvfuncError, ValueError):
    """An operation was called outside its domain of validity."""


class SolverError(CurvfuncError, RuntimeError):
    """A linear or nonlinear solve failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(CurvfuncError, ValueError):
    """Malformed or incomplete run configuration."""


class ConformalityWarning(UserWarning):
    """A vector field passed as conformal failed its certification."""
