"""Exception types shared across the package."""


class ContractError(ValueError):
    """Bad shapes, out-of-range arguments, or violated preconditions."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite or degenerate values."""
