"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a configuration value is out of its legal range."""


class UnknownLabelError(KeyError):
    """Raised when a conditioning label is not registered with the oracle."""
