"""Error types shared across the toolkit."""


class FlowerError(Exception):
    """Base class for all tool errors."""


class SourceError(FlowerError):
    """Raised when a data source is unreachable, malformed, or unsupported."""


class ConfigError(FlowerError):
    """Raised for invalid configuration values or unknown config keys."""
