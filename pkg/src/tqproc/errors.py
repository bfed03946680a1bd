"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(RuntimeError):
    """A numerical procedure failed beyond its stated tolerance."""


class DataError(ValueError):
    """Input data are structurally unusable (too few levels, nonpositive stats, ...)."""


class ConfigError(ValueError):
    """A run configuration violates the schema or a precondition."""
