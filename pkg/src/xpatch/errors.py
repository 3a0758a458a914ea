"""Exception hierarchy shared across the toolkit."""


class XPatchError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(XPatchError):
    """Tensor or array shapes are incompatible with the requested operation."""


class ParameterError(XPatchError, ValueError):
    """A function argument is out of its documented range."""


class ConfigError(XPatchError):
    """A model or run configuration is internally inconsistent."""


class DataError(XPatchError):
    """Input data cannot be used: parse failures, bad columns, short series."""


class NumericalError(XPatchError):
    """Computation became numerically unusable (NaN loss, singular system)."""
