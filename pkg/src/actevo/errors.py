class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, counts, or config-file fields."""
