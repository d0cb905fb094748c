"""Exception types shared across the package."""


class CoopNmpcError(Exception):
    """Base class for all package errors."""


class RoadRangeError(CoopNmpcError, ValueError):
    """Path coordinate lies outside the covered road range."""


class DynamicsDomainError(CoopNmpcError, ValueError):
    """Vehicle model evaluated outside its validity region."""


class ConfigError(CoopNmpcError, ValueError):
    """Scenario configuration failed validation."""
