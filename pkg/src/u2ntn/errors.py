"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration value."""


class DomainError(ValueError):
    """Argument outside the domain where a model is defined."""


class UnsupportedModelError(ValueError):
    """Requested combination is not covered by any implemented model."""


class OutputError(OSError):
    """Results could not be written."""
