"""Exception types raised across the pipeline."""


class CamidError(Exception):
    """Base class for all pipeline errors."""


class OutOfBoundsError(CamidError):
    """A crop window exceeds the image extent."""


class TooSmallError(CamidError):
    """An image is smaller than the requested crop/patch size."""


class InvalidParamError(CamidError):
    """An augmentation parameter is outside its legal domain."""


class NotAJpegError(CamidError):
    """Bytes do not parse as a JPEG stream."""


class MissingTablesError(CamidError):
    """A JPEG stream carries no quantization tables."""


class InsufficientDataError(CamidError):
    """A split or subsample asks for more records than a class has."""


class ShapeMismatchError(CamidError):
    """Tensor shapes do not agree for an operation."""


class NonFiniteGradientError(CamidError):
    """A gradient contained NaN or Inf."""


class CheckpointFormatError(CamidError):
    """Checkpoint bytes violate the CMID format contract."""


class EmptyInputError(CamidError):
    """A metric was asked to score zero items."""


class LengthMismatchError(CamidError):
    """Paired metric inputs have different lengths."""


class ConfigError(CamidError):
    """A configuration file or value is invalid."""
