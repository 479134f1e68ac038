"""Exception types shared across the package."""


class ScopeLabError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ScopeLabError, ValueError):
    """A configuration value is missing, malformed, or out of range."""


class ShapeError(ScopeLabError, ValueError):
    """Array or sequence shapes do not line up."""


class NumericError(ScopeLabError, ArithmeticError):
    """An input is NaN, infinite, or otherwise numerically unusable."""


class GraphError(ScopeLabError, RuntimeError):
    """A differentiation graph is structurally invalid (e.g. cyclic)."""


class EnvUsageError(ScopeLabError, RuntimeError):
    """An environment was driven outside its reset/step contract."""
