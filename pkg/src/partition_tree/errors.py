"""Exception types shared across the package."""


class PartitionTreeError(Exception):
    """Base class for all package errors."""


class SchemaError(PartitionTreeError):
    """Schema definition or schema/data mismatch problems."""


class ParseError(PartitionTreeError):
    """Malformed CSV content (bad field, missing value, non-finite real)."""


class UnsupportedModeError(PartitionTreeError):
    """Operation requested for an outcome layout it does not support."""


class ModelFormatError(PartitionTreeError):
    """Model document is malformed, truncated, or of an unknown version."""


class ResourceLimitError(PartitionTreeError):
    """A safety cap (e.g. refinement bin count) was exceeded."""
