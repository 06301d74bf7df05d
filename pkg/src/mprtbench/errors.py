"""Exception types shared across the bench."""


class MprtBenchError(Exception):
    """Base class for all bench-specific errors."""


class ShapeMismatchError(MprtBenchError, ValueError):
    """Input shape does not match what the model or operation expects."""


class NonFiniteError(MprtBenchError, FloatingPointError):
    """A NaN or Inf appeared where only finite values are allowed."""


class DivergenceError(MprtBenchError, RuntimeError):
    """Training loss became non-finite."""


class ModelFileError(MprtBenchError, ValueError):
    """Model manifest or weight blob is malformed, truncated or incompatible."""


class AllZeroAttributionError(MprtBenchError, ValueError):
    """Second-moment normalisation of an all-zero attribution is undefined."""


class PolicyConflictError(MprtBenchError, ValueError):
    """Requested preprocessing conflicts with a method-mandated rule."""


class DegenerateComplexityError(MprtBenchError, ValueError):
    """Complexity of the original attribution is zero, the relative rise is undefined."""


class ConfigError(MprtBenchError, ValueError):
    """Experiment configuration is invalid (unknown key, bad enum value, ...)."""
