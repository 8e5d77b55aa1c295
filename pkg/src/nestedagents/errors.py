"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad mask, bad dimensions, bad flag values."""


class IllegalActionError(RuntimeError):
    """An arena action that the rules forbid in the current state."""


class TrainingError(RuntimeError):
    """Numerical failure during learning (non-finite gradients or loss)."""
