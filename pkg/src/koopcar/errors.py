"""Exception taxonomy.

Data problems (missing files, bad schemas, short episodes) and numeric
problems (non-finite values, diverged training, malformed QPs) are kept
apart so the CLI can map them to distinct exit codes.
"""


class KoopcarError(Exception):
    """Base class for all package errors."""


class DataError(KoopcarError):
    """Missing or malformed input data (files, schemas, episode lengths)."""


class NumericError(KoopcarError):
    """Non-finite values or numerically invalid requests."""


class QpInputError(NumericError):
    """Malformed quadratic program (non-PSD cost, crossed bounds, bad shapes)."""


class TrainingDiverged(NumericError):
    """Validation loss blew up or became non-finite during training."""


class LiftModeError(KoopcarError):
    """Operation is not defined for the active lift mode."""
