"""Exception types shared across the package."""


class QprError(Exception):
    """Base class for all qprkit errors."""


class DomainError(QprError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(QprError, ValueError):
    """An invalid configuration value (levels, sizes, grids, ranges)."""


class DegeneratePairError(DomainError):
    """A signal pair is collinear, so its two-signal geometry is undefined."""


class DegenerateInputError(QprError, ValueError):
    """The input admits no meaningful result (zero spectral matrix,
    all-zero Fisher matrix, gradient identically zero at the start)."""


class ConvergenceError(QprError, RuntimeError):
    """An iteration failed to converge within its budget.

    Carries diagnostics: ``residual`` (last residual norm when applicable),
    ``iterations`` (count performed) and ``last`` (last iterate, if any).
    """

    def __init__(self, message, *, residual=None, iterations=None, last=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.last = last
