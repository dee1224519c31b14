"""Exception hierarchy shared across the package."""


class BundleChoiceError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BundleChoiceError, ValueError):
    """Invalid tuning or model configuration (kernel order, smoothing value...)."""


class InputError(BundleChoiceError, ValueError):
    """Malformed or insufficient input data."""


class DegenerateInputError(InputError):
    """Input is well formed but carries no usable variation."""


class TieError(BundleChoiceError):
    """Two or more alternatives attain the maximal utility exactly."""


class OptimizationError(BundleChoiceError, RuntimeError):
    """The global optimizer could not evaluate any candidate."""


class TrainingError(BundleChoiceError, RuntimeError):
    """First-stage training diverged."""


class EstimationError(BundleChoiceError, RuntimeError):
    """An estimator could not produce an estimate."""


class BatchError(BundleChoiceError, RuntimeError):
    """Too many replications failed in a Monte Carlo batch."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or []
