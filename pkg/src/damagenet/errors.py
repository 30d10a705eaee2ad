"""Exception hierarchy shared by all damagenet modules."""


class DamageNetError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(DamageNetError, ValueError):
    """A tensor or layer received data whose shape violates its contract."""


class DatasetError(DamageNetError):
    """Dataset root, class directory, or image file is missing or unusable."""


class ArchiveError(DamageNetError):
    """Weight archive is malformed: bad magic, version, or layout."""


class ChecksumError(ArchiveError):
    """Weight archive bytes do not match their recorded checksum."""


class TrainingError(DamageNetError):
    """A training run aborted; message identifies the epoch and batch."""
