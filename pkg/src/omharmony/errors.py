"""Exception types shared across the package."""


class OmharmonyError(Exception):
    """Base class for all package errors."""


class InvalidColorSpace(OmharmonyError, ValueError):
    """Operation received an image in the wrong color space."""


class DimensionMismatch(OmharmonyError, ValueError):
    """Images, masks or planes do not share dimensions."""


class UnsupportedBitDepth(OmharmonyError, ValueError):
    """Codec input is not 8 bits per sample."""


class DecodeFailure(OmharmonyError, ValueError):
    """File could not be decoded as PNG or JPEG."""


class UnsupportedLabelEncoding(OmharmonyError, ValueError):
    """Label raster is not an 8-bit grayscale or indexed PNG."""


class NoForeground(OmharmonyError, ValueError):
    """Label map has no non-background class; the image is skipped."""


class UnknownFilterChain(OmharmonyError, KeyError):
    """Filter chain name not present in the bank."""


class UnknownNoiseKind(OmharmonyError, ValueError):
    """Blur/noise kind outside the configured set."""


class EmptyMask(OmharmonyError, ValueError):
    """A fit was requested over a mask with zero pixels."""


class OverlappingRegions(OmharmonyError, ValueError):
    """Region masks that must be disjoint overlap."""


class UnknownChannel(OmharmonyError, ValueError):
    """Operator-mask edit referenced a channel outside the set."""


class SchemaMismatch(OmharmonyError, ValueError):
    """Manifest or mask file has the wrong magic/version."""


class MissingBackend(OmharmonyError, LookupError):
    """No perceptual-distance backend registered under that name."""
