"""Exception types shared across the package."""


class TacflowError(Exception):
    """Base class for all package-specific errors."""


class PgmError(TacflowError, ValueError):
    """Malformed header, truncated payload, or unsupported maxval in PGM data."""


class DimensionError(TacflowError, ValueError):
    """Image or field dimensions that are too small or mismatched."""


class PyramidError(TacflowError, ValueError):
    """Pyramid depth incompatible with the frame size."""


class RoiError(TacflowError, ValueError):
    """Region of interest empty or outside the grid."""


class ScheduleError(TacflowError, ValueError):
    """Non-monotonic timestamps or invalid deformation schedule."""


class SchemaError(TacflowError, ValueError):
    """Structurally invalid JSON for specs, schedules, scenarios, or models."""


class SyncError(TacflowError, ValueError):
    """Time series with no overlapping span."""


class FitError(TacflowError, ValueError):
    """Rank-deficient or otherwise unfittable calibration data."""
