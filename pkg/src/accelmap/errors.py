"""Exception types shared across the package."""


class AccelMapError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(AccelMapError):
    """A document does not conform to its schema (bad/missing field)."""


class ValidationError(AccelMapError):
    """A structurally well-formed object violates a domain constraint."""


class NotFoundError(AccelMapError):
    """A named builtin (model, design, topology) does not exist."""


class UnreachableError(AccelMapError):
    """A transfer was requested between accelerators with no path."""


class BaselineError(AccelMapError):
    """The baseline mapper does not support the given topology."""


class OracleLimitError(AccelMapError):
    """The exhaustive oracle refuses an instance above its size limits."""
