"""Exception types shared across the toolkit."""


class ZoomrdsError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ZoomrdsError):
    """Experiment configuration does not parse or validate."""


class HorizonError(ZoomrdsError):
    """A contraction family was queried beyond its evaluation horizon."""


class DomainError(ZoomrdsError):
    """An argument fell outside the mathematical domain of an operation."""


class ResolutionError(ZoomrdsError):
    """A grid is too coarse for the requested separation scale."""


class PreconditionError(ZoomrdsError):
    """A documented precondition of a construction failed (CLI exit 4)."""


class TreeSizeError(ZoomrdsError):
    """An inverse-branch enumeration exceeded the configured size cap."""


class BracketError(ZoomrdsError):
    """A root bracket could not be made to straddle the target value."""
