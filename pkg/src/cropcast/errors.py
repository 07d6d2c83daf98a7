"""Exception types shared across the package."""


class CropcastError(Exception):
    """Base class for all cropcast errors."""


class GridMismatchError(CropcastError):
    """Two rasters that must share a geometry do not."""


class NoOverlapError(CropcastError):
    """Source and target grids have disjoint bounding boxes."""


class HeaderMismatchError(CropcastError):
    """Binary payload size disagrees with the header's declared shape."""


class ParseError(CropcastError):
    """A file could not be parsed into the expected structure."""


class NegativeQuantityError(CropcastError):
    """A production or consumption quantity is negative."""


class ZeroProductionError(CropcastError):
    """Self-sufficiency ratio requested for a commodity with zero production."""


class EmptyStackError(CropcastError):
    """A time-series stack holds no frames."""


class EmptyWindowError(CropcastError):
    """A season window selects no frames for some parameter."""


class EmptyDatasetError(CropcastError):
    """An operation requires at least one sample."""


class DimensionMismatchError(CropcastError):
    """Feature dimensions disagree between data and model."""


class InsufficientHistoryError(CropcastError):
    """Not enough historical seasons to train a forecaster."""


class DivergenceError(CropcastError):
    """Training loss became non-finite."""


class LengthMismatchError(CropcastError):
    """Two paired sequences have different lengths."""


class EmptyInputError(CropcastError):
    """An aggregate requested over an empty sequence."""


class ZeroBaselineError(CropcastError):
    """Rate of change requested against a zero baseline."""


class AllZeroError(CropcastError):
    """Shares requested for totals that are all zero."""


class InvalidConfigError(CropcastError):
    """A configuration failed validation; message lists the diagnostics."""
