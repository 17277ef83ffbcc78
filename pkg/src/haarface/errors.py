"""Exception hierarchy shared by all haarface modules."""


class HaarfaceError(Exception):
    """Base class for every error raised by this package."""


# imaging
class RectOutOfBounds(HaarfaceError, ValueError):
    pass


class NetpbmError(HaarfaceError, ValueError):
    """Raised when a Netpbm byte stream cannot be decoded."""


class UnsupportedMagic(NetpbmError):
    pass


class TruncatedPayload(NetpbmError):
    pass


class MaxvalOutOfRange(NetpbmError):
    pass


class NonNumericHeader(NetpbmError):
    pass


class InvalidSample(NetpbmError):
    pass


# cascade model
class CascadeError(HaarfaceError, ValueError):
    """Raised when a cascade XML document cannot be turned into a model."""


class MalformedXml(CascadeError):
    pass


class UnsupportedFormat(CascadeError):
    pass


class InvariantViolation(CascadeError):
    pass


# detector
class WindowOutOfBounds(HaarfaceError, ValueError):
    pass


class ImageTooSmall(HaarfaceError, ValueError):
    pass


# encoder
class FaceTooSmall(HaarfaceError, ValueError):
    pass


# gallery
class GalleryError(HaarfaceError, ValueError):
    pass


class BadMagic(GalleryError):
    pass


class UnsupportedVersion(GalleryError):
    pass


class TruncatedEntry(GalleryError):
    pass


class TrailingBytes(GalleryError):
    pass


class InvalidLabel(GalleryError):
    pass


class InvalidEncoding(GalleryError):
    pass


class EmptyGallery(GalleryError):
    pass


# evaluation
class EmptyInput(HaarfaceError, ValueError):
    pass


class UnknownLabelInTruth(HaarfaceError, ValueError):
    pass


class SchemaError(HaarfaceError, ValueError):
    """A JSON input document does not follow the expected layout."""
