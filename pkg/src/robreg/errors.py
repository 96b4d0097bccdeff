"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters, malformed input files, or violated call contracts."""


class NumericalError(RuntimeError):
    """Non-finite values or singular systems encountered during computation."""
