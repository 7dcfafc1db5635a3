"""Exception hierarchy.

``DataError`` covers bad or unusable input data, ``IoError`` covers failures
to read or write files. The CLI maps the two families to distinct exit codes.
"""


class IrisError(Exception):
    """Base class for every error raised by this package."""


class DataError(IrisError):
    pass


class IoError(IrisError, OSError):
    pass


class MalformedImage(DataError):
    pass


class InvalidPupil(DataError):
    pass


class NoPupilFound(DataError):
    pass


class BoundaryNotFound(DataError):
    pass


class BandTooThin(DataError):
    pass


class InsufficientValidity(DataError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class EmptyOverlap(DataError):
    pass


class MalformedCode(DataError):
    pass


class MalformedSigSet(DataError):
    pass


class DanglingReference(MalformedSigSet):
    pass


class DuplicateComparison(MalformedSigSet):
    pass


class EmptyInput(DataError, ValueError):
    pass


class ZeroVariance(DataError, ValueError):
    pass


# errors that only affect one sample and may be skipped during batch runs
SEGMENTATION_ERRORS = (NoPupilFound, BoundaryNotFound, BandTooThin, InsufficientValidity, InvalidPupil)
