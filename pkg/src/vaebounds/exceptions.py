class VaeBoundsError(Exception):
    """Base class for library errors."""


class DimensionError(VaeBoundsError, ValueError):
    pass


class SymmetryError(VaeBoundsError, ValueError):
    pass


class NonFiniteError(VaeBoundsError, ValueError):
    pass


class SingularityError(VaeBoundsError, ArithmeticError):
    """A matrix that must be invertible is (numerically) rank deficient."""


class FactorizationError(VaeBoundsError, ArithmeticError):
    """A covariance that must be symmetric positive definite is not."""


class InsufficientDataError(VaeBoundsError, ValueError):
    pass


class ContractError(VaeBoundsError, RuntimeError):
    """An API precondition on call structure (not on values) was violated."""
