"""Exception hierarchy shared across the package."""


class AdastratError(Exception):
    """Base class for errors raised by adastrat."""


class DimensionMismatchError(AdastratError, ValueError):
    """A point or array has the wrong dimension for its environment."""


class CatalogError(AdastratError, KeyError):
    """Unknown or malformed builtin environment name."""


class CapacityError(AdastratError, OverflowError):
    """A requested partition has more strata than can be indexed."""


class InfeasibleBudgetError(AdastratError, ValueError):
    """The sampling budget is too small for the requested algorithm."""


class UndefinedStatisticsError(AdastratError, ValueError):
    """Empirical statistics requested from an empty accumulator."""


class DegenerateProblemError(AdastratError, ValueError):
    """Every stratum has zero standard deviation; any allocation is optimal."""


class ConfigurationError(AdastratError, ValueError):
    """Declared constants or parameters are inconsistent."""
