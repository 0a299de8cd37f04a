"""Exception hierarchy shared by all voxanno modules."""


class VoxannoError(Exception):
    """Base class for every error raised by this package."""


# --- volume / label storage ---------------------------------------------

class MissingFile(VoxannoError):
    pass


class BadHeader(VoxannoError):
    pass


class DimensionMismatch(VoxannoError):
    pass


class BadClassId(VoxannoError):
    pass


class SliceOutOfRange(VoxannoError):
    pass


# --- annotation ----------------------------------------------------------

class OutOfBounds(VoxannoError):
    pass


class UnknownClass(VoxannoError):
    pass


class DegeneratePolygon(VoxannoError):
    pass


class VersionMismatch(VoxannoError):
    pass


class MalformedLog(VoxannoError):
    pass


# --- model / training ----------------------------------------------------

class ShapeMismatch(VoxannoError):
    pass


class NonFiniteActivation(VoxannoError):
    pass


class NonFiniteUpdate(VoxannoError):
    pass


class NoLabeledPixels(VoxannoError):
    pass


class BadConfig(VoxannoError):
    pass


class SessionClosed(VoxannoError):
    pass


class UnknownVolume(VoxannoError):
    pass


# --- metrics / questionnaires --------------------------------------------

class EmptyOverlap(VoxannoError):
    pass


class EmptyMatrix(VoxannoError):
    pass


class TooFewValues(VoxannoError):
    pass


class MalformedResponse(VoxannoError):
    pass


class OutOfRange(VoxannoError):
    pass


class BadDims(VoxannoError):
    pass
