"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """A scenario parameter or CLI input is invalid."""


class DropError(RuntimeError):
    """A random drop could not satisfy its placement constraints."""


class StatisticsError(ValueError):
    """A statistics operation received unusable input (e.g. no samples)."""
