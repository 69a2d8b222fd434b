"""Exception types raised by kitscan."""


class KitscanError(Exception):
    """Base class for all kitscan errors."""


class IngestError(KitscanError):
    pass


class UnsupportedFormat(IngestError):
    pass


class LimitExceeded(IngestError):
    pass


class CorruptArchive(IngestError):
    pass


class EncryptedArchive(IngestError):
    pass


class RegistryLoadError(KitscanError):
    pass


class DegenerateDataset(KitscanError):
    """Training or splitting requested on data holding a single class."""


class DimensionMismatch(KitscanError):
    pass


class ModelFileError(KitscanError):
    pass


class VersionMismatch(ModelFileError):
    pass


class MalformedModel(ModelFileError):
    pass


class EmptyTestSet(KitscanError):
    pass


class KitIdMismatch(KitscanError):
    pass


class MissingExclusion(KitscanError):
    pass


class MalformedMatrix(KitscanError):
    pass
