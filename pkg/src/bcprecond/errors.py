"""Exception hierarchy shared by all modules."""


class BcPrecondError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BcPrecondError, ValueError):
    """Invalid parameter or configuration."""


class DimensionError(BcPrecondError, ValueError):
    """Operand shapes do not conform."""


class SymmetryError(BcPrecondError, ValueError):
    """A matrix or operator expected to be symmetric is not."""


class NotSpdError(BcPrecondError, ValueError):
    """A matrix expected to be symmetric positive definite is not."""


class SingularError(BcPrecondError, ArithmeticError):
    """Matrix is singular within the pivot tolerance."""


class CapError(BcPrecondError, ValueError):
    """Dense conversion requested above the configured dimension cap."""


class PreconditionerError(BcPrecondError, ValueError):
    """Preconditioner failed a linearity or definiteness probe."""


class FactorizationError(BcPrecondError, ArithmeticError):
    """Incomplete factorization broke down after all diagonal shifts."""


class DivergenceError(BcPrecondError, ArithmeticError):
    """An inner fixed-step iteration blew up (reported as a dash in tables)."""


class NonConvergence(BcPrecondError, RuntimeError):
    """Outer nonlinear iteration hit its iteration limit."""


class IoError(BcPrecondError, OSError):
    """Missing or malformed artifact on disk."""
