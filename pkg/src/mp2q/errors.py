class Mp2qError(Exception):
    """Base error for this package."""


class SchemaError(Mp2qError):
    """Input file violates its schema or declared invariants."""


class LoweringError(Mp2qError):
    """No edge-respecting realization exists for a gate."""


class NumericalError(Mp2qError):
    """Zero denominator or other numerical failure."""
