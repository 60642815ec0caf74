"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class DegenerateStatisticError(ArithmeticError):
    """Raised when a likelihood ratio has zero numerator and zero denominator."""
