"""Exception types shared across the package.

The CLI maps each category to a stable machine-readable token on stderr, so
subclass names here are part of the external error contract.
"""


class EvrotError(Exception):
    """Base class for all package errors."""

    category = "error"


class DataFormatError(EvrotError):
    """Malformed input file or record."""

    category = "data-format"


class InsufficientDataError(EvrotError):
    """Not enough events or measurements to run the requested operation."""

    category = "insufficient-data"


class DegenerateGeometryError(EvrotError):
    """Input geometry does not constrain the solution (e.g. collinear rays)."""

    category = "degenerate-geometry"


class DegenerateInputError(EvrotError):
    """Numerically unusable input (e.g. undistortion fails to converge)."""

    category = "degenerate-input"


class OptimizationFailureError(EvrotError):
    """An iterative solver produced a non-finite or unusable state."""

    category = "optimization-failure"
