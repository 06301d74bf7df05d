"""mprtbench: a desk-scale bench for parameter-randomisation sanity checks.

Small deterministic CNNs, ten attribution methods plus a random baseline,
layer randomisation protocols, similarity/complexity scoring and a
meta-consistency benchmark, all runnable from one CLI.
"""

from .backend import active_backend, compiled_available, set_backend
from .errors import (AllZeroAttributionError, ConfigError, DegenerateComplexityError,
                     DivergenceError, ModelFileError, MprtBenchError, NonFiniteError,
                     PolicyConflictError, ShapeMismatchError)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "active_backend", "compiled_available", "set_backend",
    "AllZeroAttributionError", "ConfigError", "DegenerateComplexityError",
    "DivergenceError", "ModelFileError", "MprtBenchError", "NonFiniteError",
    "PolicyConflictError", "ShapeMismatchError",
]
