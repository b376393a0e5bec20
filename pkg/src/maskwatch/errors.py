"""Exception hierarchy shared across the package."""


class MaskwatchError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(MaskwatchError):
    pass


class DegenerateGeometryError(GeometryError):
    """Fewer than 3 distinct points, or all points collinear."""


class InvalidPolygonError(GeometryError):
    """Vertex list violates the polygon invariants (orientation, simplicity)."""


class EmptyRoiError(MaskwatchError):
    """ROI raster contains no pixels."""


class ShapeMismatchError(MaskwatchError):
    """Bitmasks of different dimensions were combined."""


class EmptyInputError(MaskwatchError):
    """An operation that needs at least one observation got none."""


class MergeError(MaskwatchError):
    """Aggregates for different dates cannot be merged."""


class ZeroVarianceError(MaskwatchError):
    """A constant series has no defined correlation / t statistic."""


class InsufficientDataError(MaskwatchError):
    """Not enough observations for the requested test."""


class ConvergenceError(MaskwatchError):
    """An iterative numeric routine failed to converge."""


class DateRangeError(MaskwatchError):
    """A date falls outside the span it must lie in."""


class EmptyCohortError(MaskwatchError):
    """A cohort comparison has an empty side."""


class ConfigError(MaskwatchError):
    """Invalid study configuration."""


class CaseSeriesError(MaskwatchError):
    """Malformed case-count input."""


class GapError(CaseSeriesError):
    """A date is missing from a case series."""


class MonotonicityError(CaseSeriesError):
    """Cumulative case counts decreased."""


class UnknownCityError(CaseSeriesError):
    """A row references a city_id absent from the configuration."""


class PnmError(MaskwatchError):
    """Malformed P4/P5 bitmap file."""
