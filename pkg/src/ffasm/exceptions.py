"""Exception hierarchy shared by all ffasm modules."""


class FfasmError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(FfasmError, ValueError):
    pass


class InsufficientData(FfasmError, ValueError):
    pass


class BandwidthTooSmall(FfasmError, ValueError):
    pass


class InvalidCovariance(FfasmError, ValueError):
    pass


class GridMismatch(FfasmError, ValueError):
    pass


class ShapeMismatch(FfasmError, ValueError):
    pass


class DegenerateSpectrum(FfasmError, ValueError):
    pass


class InvalidResponse(FfasmError, ValueError):
    pass


class NumericalError(FfasmError, ArithmeticError):
    pass


class Undefined(FfasmError, ValueError):
    """A statistic is not defined for the given input (e.g. zero variance)."""
