"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A parameter violates its documented domain."""


class HorizonError(IndexError):
    """A requested time lies outside the noise trace horizon."""


class SingularityError(ArithmeticError):
    """An expression was evaluated at a pole."""


class FitError(RuntimeError):
    """A curve fit could not be performed on the given data."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""
