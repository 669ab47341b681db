"""Exception types shared across the package."""


class ScimigrateError(Exception):
    """Base class for errors raised by this package."""


class IngestError(ScimigrateError):
    """Fatal ingest problem (unreadable stream, bad container, ...)."""


class ConsistencyError(IngestError):
    """Corpus-level contradiction, e.g. conflicting duplicate records."""


class UndefinedValueError(ScimigrateError):
    """An indicator is undefined for the given inputs (zero denominator,
    degenerate regression, zero variance)."""
