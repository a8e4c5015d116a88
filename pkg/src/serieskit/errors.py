"""Exception hierarchy."""


class SerieskitError(Exception):
    """Base class for all library errors."""


class ParameterError(SerieskitError, ValueError):
    """Invalid configuration or argument value."""


class DimensionError(SerieskitError, ValueError):
    """Series length / segment count mismatch."""


class ValidationError(SerieskitError, ValueError):
    """Data failed load-time validation (non-finite values, bad sizes)."""


class SizeMismatchError(ValidationError):
    """Dataset file size is not a multiple of the series byte width."""


class BoundsError(SerieskitError, IndexError):
    """Series id outside [0, N)."""


class StateError(SerieskitError, RuntimeError):
    """Operation called in the wrong session state (e.g. search before build)."""


class IndexFormatError(SerieskitError):
    """Persisted index stream is unreadable."""


class VersionMismatchError(IndexFormatError):
    """Persisted index has an unknown magic or version."""


class ChecksumMismatchError(IndexFormatError):
    """Header or raw-data checksum does not match."""


class TruncatedIndexError(IndexFormatError):
    """Persisted index stream ended early."""


class IntegrityError(SerieskitError):
    """Raw data file is missing or was modified after indexing."""
