"""Exception types shared across the package."""


class ScribblePropError(Exception):
    """Base class for every error raised by this package."""


# file and wire-format errors

class MissingFile(ScribblePropError, FileNotFoundError):
    pass


class UnsupportedFormat(ScribblePropError):
    pass


class CorruptData(ScribblePropError):
    pass


class IoFailure(ScribblePropError, OSError):
    pass


class SchemaViolation(ScribblePropError):
    pass


class OutOfBoundsCoordinate(ScribblePropError):
    pass


class EmptyPolyline(ScribblePropError):
    pass


class ValueOutOfRange(ScribblePropError):
    pass


class NotNormalized(ScribblePropError):
    pass


# parameter / construction errors

class InvalidParameter(ScribblePropError):
    pass


class InvalidSpec(ScribblePropError):
    pass


class DimensionMismatch(ScribblePropError):
    pass


class ShapeMismatch(ScribblePropError):
    pass


class InconsistentSizes(ScribblePropError):
    pass


class LengthMismatch(ScribblePropError):
    pass


class EmptyPixelSet(ScribblePropError):
    pass


class OverlapOutsideUniverse(ScribblePropError):
    pass


class NonFiniteLogProb(ScribblePropError):
    pass


class UniverseMismatch(ScribblePropError):
    pass


# solver errors

class InfeasibleCurrent(ScribblePropError):
    pass


class NoFeasibleLabeling(ScribblePropError):
    pass


# training / dataset errors

class EmptyTrainingSet(ScribblePropError):
    pass


class LabelOutOfRange(ScribblePropError):
    pass


class NoScribbles(ScribblePropError):
    pass


class EmptyDataset(ScribblePropError):
    pass
