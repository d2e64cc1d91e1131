"""Exception hierarchy shared by every module in the package."""


class S2PError(Exception):
    """Base class for all errors raised by s2pnilm."""


class ConfigurationError(S2PError, ValueError):
    """Shapes, layer chains, heads or settings that do not fit together."""


class NumericError(S2PError, ArithmeticError):
    """A non-finite value appeared where finiteness is required."""


class IngestionError(S2PError):
    """A channel file could not be read into a TimeSeries."""


class AlignmentError(S2PError):
    """Two channels could not be put on a common grid."""


class WindowingError(S2PError):
    """Windows could not be cut from the given data."""


class TrainingError(S2PError):
    """Training diverged or could not run."""


class CheckpointError(S2PError):
    """A checkpoint file is corrupt, truncated or of an unknown version."""


class InferenceError(S2PError):
    """Prediction could not be produced for the given input."""


class UndefinedMetricError(S2PError, ZeroDivisionError):
    """A metric is undefined for the given ground truth (e.g. SAE with zero energy).

    ``report`` optionally carries the partial evaluation computed before the
    failure, so callers can still read the MAE.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class GenerationError(S2PError):
    """A synthetic appliance or scene could not be generated."""


class PerturbationError(S2PError):
    """A window perturbation was requested on a window it cannot apply to."""
