"""Exception types shared across the package."""


class FlowtrainError(Exception):
    """Base class for all flowtrain-specific failures."""


class CapacityError(FlowtrainError):
    """A state space is too large for exact enumeration."""


class ConfigurationError(FlowtrainError):
    """Inconsistent or unusable configuration (bad method/pool/layout combination)."""


class EstimationFailedError(FlowtrainError):
    """A stochastic estimator produced no usable estimate (e.g. all AIS weights degenerate)."""


class TrainingDivergedError(FlowtrainError):
    """Parameters became non-finite during training.

    Carries the trace collected up to the point of failure in ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DataFormatError(FlowtrainError):
    """A file could not be parsed; the message names the offending location."""
