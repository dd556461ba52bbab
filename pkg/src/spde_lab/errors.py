"""Exception types shared across the package.

The command line maps these onto process exit codes: configuration and I/O
problems exit with 2, Newton solver failures with 3, and failed hard
verification criteria with 1.
"""


class SpdeLabError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(SpdeLabError, ValueError):
    """A numeric argument lies outside its documented range."""


class GridMismatchError(SpdeLabError, ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class ConfigError(SpdeLabError, ValueError):
    """A run configuration is malformed, incomplete, or contradictory."""


class SolverError(SpdeLabError, RuntimeError):
    """The damped Newton iteration failed to reach its residual tolerance."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class DegenerateSampleError(SpdeLabError, RuntimeError):
    """A randomized check drew no usable samples (all pairs too close, etc.)."""


class ConsistencyError(SpdeLabError, RuntimeError):
    """An exact internal identity failed beyond floating-point tolerance."""
