"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge."""


class SeparationError(RuntimeError):
    """The partial likelihood is monotone; the estimate diverges."""


class ConfigError(ValueError):
    """A trial configuration is invalid."""
