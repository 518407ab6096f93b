"""Exception taxonomy shared by all modules."""


class GraftClipError(Exception):
    """Base class for all package errors."""


class ParameterError(GraftClipError):
    """Bad argument to an operation (shape mismatch, out-of-range value)."""


class ConfigurationError(GraftClipError):
    """Inconsistent or invalid configuration."""


class DegenerateInputError(GraftClipError):
    """Input is mathematically unusable (e.g. near-zero vector norm)."""


class EvaluationError(GraftClipError):
    """A numeric evaluation produced a non-finite or unusable result."""


class NumericalError(GraftClipError):
    """A solver could not produce a reliable solution."""


class TrainingError(GraftClipError):
    """Training diverged or otherwise failed mid-run."""


class CheckpointFormatError(GraftClipError):
    """Checkpoint bytes do not conform to the on-disk format."""
