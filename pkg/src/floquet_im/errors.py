"""Exception types shared across the package."""


class FloquetIMError(Exception):
    """Base class for all package-specific errors."""


class PoleError(FloquetIMError):
    """A trigonometric denominator sits on (or too close to) a pole."""


class DimensionError(FloquetIMError):
    """Operand dimensions are inconsistent with the requested operation."""


class CapacityError(FloquetIMError):
    """Requested dense object exceeds the configured qubit cap."""


class DegenerateError(FloquetIMError):
    """A basis change or normalization degenerates for these parameters."""


class PrecisionError(FloquetIMError):
    """Requested precision/extrapolation accuracy could not be certified."""


class NotEigenvalueError(FloquetIMError):
    """A value assumed to be in the spectrum is not, within tolerance."""


class RangeError(FloquetIMError):
    """Argument outside the validity range of a formula or table."""


class ConvergenceError(FloquetIMError):
    """An iterative solver or fit failed to converge."""


class LogBranchError(FloquetIMError):
    """Matrix logarithm hit the branch cut; generator is ambiguous."""
