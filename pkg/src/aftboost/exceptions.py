"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation (NaN, inf where finite is required)."""


class LabelError(ValueError):
    """A survival label violates its invariants."""


class SchemaError(ValueError):
    """Column layout of a matrix, record or file does not match what is expected."""


class DataFaultError(ValueError):
    """Inconsistent source data, e.g. a fix published before the vulnerability was detected."""


class ModelFormatError(ValueError):
    """A persisted model or encoder bundle cannot be read."""
