"""Exception types raised across the package."""


class InvalidPolicyError(ValueError):
    """A payoff policy violates a standing assumption or region requirement."""


class DomainError(ValueError):
    """A state or argument lies outside its admissible domain."""


class DimensionMismatchError(ValueError):
    """A state vector does not match the number of populations."""


class EmptyStrategySetError(ValueError):
    """The restricted strategy set of an agent is empty."""


class NonFiniteStateError(ArithmeticError):
    """Integration produced NaN or infinite state components."""
