"""Exception kinds shared across the package."""


class DimensionError(ValueError):
    """Tensor or layer shapes do not line up."""


class ConfigurationError(ValueError):
    """A layer, dataset, or run configuration cannot produce a valid result."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training; carries diagnostics in the message."""


class ModelFormatError(Exception):
    """Base class for model container read failures."""


class BadMagicError(ModelFormatError):
    """File does not start with the expected container magic."""


class TruncatedBlobError(ModelFormatError):
    """Container ends before the declared weight blob does."""


class ShapeChainError(ModelFormatError):
    """Layer shapes in the container do not chain together."""
