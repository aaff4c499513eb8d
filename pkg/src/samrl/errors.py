"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, unknown keys, inconsistent options."""


class InputError(ValueError):
    """Malformed runtime input, e.g. NaN actions."""


class NumericsError(RuntimeError):
    """A training run produced non-finite parameters or gradients."""
