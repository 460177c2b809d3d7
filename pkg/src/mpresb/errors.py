"""Exception types shared across the package."""


class ContractError(ValueError):
    """Raised when an argument violates an operation's preconditions
    (dimension mismatch, parameter out of range, size guard exceeded)."""


class InnerSolveError(RuntimeError):
    """An inner (preconditioner) solve failed to meet its residual contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefiniteError(InnerSolveError):
    """A factorization that requires a positive definite matrix hit a
    non-positive pivot."""


class NonFiniteError(FloatingPointError):
    """NaN or Inf appeared inside an iterative method."""


class SpectralError(RuntimeError):
    """A dense eigensolver did not converge or broke its residual contract."""
