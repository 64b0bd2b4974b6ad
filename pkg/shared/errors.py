from __future__ import annotations


class DscError(Exception):
    exit_code = 1


class ConfigError(DscError, ValueError):
    exit_code = 2


class DegenerateModelError(ConfigError):
    pass


class TruncationError(DscError, RuntimeError):
    exit_code = 3


class NonConvergenceError(DscError, RuntimeError):
    exit_code = 4


class StepSizeError(NonConvergenceError):
    """Raised when a trajectory loses more than the allowed norm in one step."""
