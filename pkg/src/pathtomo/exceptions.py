"""Exception types raised across the package."""


class PathTomoError(Exception):
    """Base class for all package errors."""


class NonUnitaryInput(PathTomoError, ValueError):
    pass


class IndexOutOfRange(PathTomoError, IndexError):
    pass


class UnknownMode(PathTomoError, KeyError):
    pass


class DuplicateAncilla(PathTomoError, ValueError):
    pass


class UnknownLabel(PathTomoError, KeyError):
    pass


class DivisionByZeroSingles(PathTomoError, ZeroDivisionError):
    pass


class SingularTransferMatrix(PathTomoError, ValueError):
    """The chosen phase pair gives a (numerically) non-invertible design."""


class InsufficientDesign(PathTomoError, ValueError):
    """The records do not constrain every density-matrix parameter."""


class NonConvergence(PathTomoError, RuntimeError):
    pass


class MissingPhaseBin(PathTomoError, LookupError):
    pass


class CalibrationRange(PathTomoError, ValueError):
    pass


class EmptyBin(PathTomoError, ValueError):
    pass


class OutOfRange(PathTomoError, ValueError):
    pass


class ConvergenceWarning(UserWarning):
    """Optimizer stopped on its evaluation budget; best point returned."""
