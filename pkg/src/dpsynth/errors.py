"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 2, data problems 3,
numeric failures 4, calibration failures 5.
"""


class UsageError(ValueError):
    """A caller violated a documented precondition (bad argument, bad combo)."""


class ShapeError(UsageError):
    """Array dimensions do not line up."""


class IngestionError(ValueError):
    """Input data could not be parsed or failed validation."""


class FitError(IngestionError):
    """Statistics needed for preprocessing cannot be computed (e.g. constant column)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite or otherwise unusable values."""


class TrainingDiverged(NumericError):
    """Training objective or parameters left the finite, bounded regime."""


class MetricError(NumericError):
    """A metric is undefined for the given inputs (e.g. degenerate bandwidth)."""


class CalibrationError(RuntimeError):
    """Noise calibration could not reach the target privacy budget."""
