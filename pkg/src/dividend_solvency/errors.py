"""Exception hierarchy shared across the solver modules."""


class DividendSolverError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DividendSolverError, ValueError):
    """Model parameters violate a standing assumption."""


class DegenerateCost(ValidationError):
    """Reinsurance is not strictly more expensive than the insurer's own loading."""


class NonPositive(ValidationError):
    pass


class RiskOutOfRange(ValidationError):
    pass


class DomainError(DividendSolverError, ValueError):
    """An argument lies outside the domain of the evaluated function."""


class ConfigError(DividendSolverError, ValueError):
    pass


class GridError(DividendSolverError, ValueError):
    pass


class NoConvergence(DividendSolverError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class InstabilityError(NoConvergence):
    """Finite-difference solution left the admissible range [0, 1]."""


class NoBracket(DividendSolverError):
    """Barrier search exceeded its growth cap without meeting the risk level."""


class Unattainable(DividendSolverError):
    """Requested risk level cannot be met at the given barrier."""
