"""Exception types shared across the package."""


class AllgError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(AllgError):
    """Invalid configuration value or command-line argument."""


class DataError(AllgError):
    """Dataset ingestion, splitting, or labeling problem."""


class NumericalError(AllgError):
    """Non-finite values or a failed numerical routine."""
