"""Quantum-circuit estimation of MP2 correlation energies, simulated classically."""

from . import builders, circuits, coupling, estimate, hfdata, lowering, mp2, statevec
from .errors import LoweringError, Mp2qError, NumericalError, SchemaError

__version__ = "0.1.0"

__all__ = [
    "builders", "circuits", "coupling", "estimate", "hfdata", "lowering",
    "mp2", "statevec",
    "Mp2qError", "SchemaError", "LoweringError", "NumericalError",
    "__version__",
]
