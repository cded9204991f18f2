"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class NumericFailureError(ArithmeticError):
    """Raised when a solver diverges or a linear system is too ill-conditioned."""


class DataError(ValueError):
    """Raised when an input file does not follow its schema."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""
