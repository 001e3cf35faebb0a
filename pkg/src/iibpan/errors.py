"""Exception types raised across the toolkit."""


class IIBError(ValueError):
    """Base class for every validation error raised by iibpan."""


class DimensionMismatchError(IIBError):
    pass


class NonFiniteSampleError(IIBError):
    pass


class BandOutOfRangeError(IIBError, IndexError):
    pass


class ShapeMismatchError(IIBError):
    pass


class TooFewSamplesError(IIBError):
    pass


class FormatError(IIBError):
    """A binary file does not follow its declared layout."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class GeometryError(IIBError):
    """Image sizes do not fit together (ratio, padding, band counts)."""


class DegenerateWindowError(IIBError):
    """Q index undefined: both denominator factors vanish and no stabilizer is set."""


class ArchitectureError(IIBError):
    pass
