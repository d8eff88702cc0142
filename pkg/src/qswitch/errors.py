"""Exception hierarchy shared by the analytics, simulator and CLI."""


class SwitchError(Exception):
    """Base class for every error raised by :mod:`qswitch`."""


class InvalidParameterError(SwitchError, ValueError):
    pass


class InstabilityError(SwitchError):
    """Raised when an infinite-horizon metric is requested for an unstable chain."""


class WrongModelError(SwitchError, ValueError):
    """The configuration is outside the model family the operation covers."""


class UnsupportedModelError(WrongModelError):
    pass


class NumericError(SwitchError, ArithmeticError):
    pass


class ResourceError(SwitchError):
    pass


class ConjecturedStabilityWarning(UserWarning):
    """Result relies on stability that is conjectured rather than proven (n >= 4)."""
