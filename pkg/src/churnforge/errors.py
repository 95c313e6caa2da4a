"""Shared exception types."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class SchemaError(ValueError):
    """Input file does not match the declared schema."""


class DataError(ValueError):
    """Malformed or inconsistent data beyond the tolerated threshold."""


class DegenerateLabelsError(ValueError):
    """Training labels contain a single class where two are required."""


class UndefinedCurveError(ValueError):
    """ROC/PR curve is undefined (single-class labels)."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""
