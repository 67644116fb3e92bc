"""Exception types shared across the package."""


class KtrlfError(Exception):
    """Base class for all errors raised by this package."""


class DatasetFormatError(KtrlfError):
    """A dataset or prediction file violates the JSONL schema.

    Messages name the offending line number and field.
    """


class IntegrityError(KtrlfError):
    """Cross-field validation failed (e.g. a span's text does not match the document)."""


class TransportError(KtrlfError):
    """A remote call failed at the network level and no cached response exists. Retryable."""


class ProtocolError(KtrlfError):
    """A remote service answered, but the payload is malformed. Messages name the field."""


class EncodingError(KtrlfError):
    """A span could not be encoded (e.g. it covers no tokens after tokenization)."""


class IndexBuildError(KtrlfError):
    """Index construction failed; no partial index is returned."""


class IndexFormatError(KtrlfError):
    """An on-disk index file is corrupt or has an unknown format."""
