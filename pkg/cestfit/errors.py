class CestError(Exception):
    """Base class for all errors raised by cestfit."""


class InvalidInput(CestError, ValueError):
    pass


class ConfigError(CestError, ValueError):
    pass


# spectra
class MissingReference(CestError):
    pass


class NonPositiveReference(CestError):
    pass


class EdgeMinimum(CestError):
    pass


class ExtrapolationNeeded(CestError):
    pass


class NonPositiveAmplitude(CestError, ValueError):
    pass


class AsymmetricSupport(CestError):
    pass


class ZeroSignal(CestError):
    pass


# models / fitting
class IndexOutOfRange(CestError, IndexError):
    pass


class GridMismatch(CestError):
    pass


class MaxIterations(CestError):
    pass


class LineSearchFailure(CestError):
    pass


class SolverStalled(CestError):
    pass


# network
class ShapeMismatch(CestError):
    pass


class LengthMismatch(CestError):
    pass


class InsufficientData(CestError):
    pass


# synthetic data
class ShiftTooLarge(CestError, ValueError):
    pass


# evaluation
class DegenerateDesign(CestError):
    pass


class DegenerateTarget(CestError):
    pass
