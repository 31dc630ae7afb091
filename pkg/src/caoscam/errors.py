"""Exception hierarchy shared by all caoscam modules."""


class CaosError(Exception):
    """Base class for every error raised by caoscam."""


class ParameterError(CaosError, ValueError):
    """An argument is outside its documented domain."""


class CapacityError(ParameterError):
    """More CAOS pixels were requested than the codebook can serve."""


class DomainError(ParameterError):
    """A metric was asked to evaluate outside its mathematical domain."""


class InsufficientDataError(ParameterError):
    """Too few points to compute a statistic."""


class ConfigurationError(CaosError):
    """Inconsistent combination of inputs (channels, masks, files)."""


class FormatError(CaosError):
    """A file does not match its binary or text layout."""


class FramingError(FormatError):
    """Sample counts do not divide into whole bit windows."""
