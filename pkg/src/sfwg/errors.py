"""Exception types shared across the package."""


class WGError(Exception):
    """Base class for all errors raised by sfwg."""


class ConfigurationError(WGError, ValueError):
    """Invalid user-supplied parameters (degrees, levels, coefficients)."""


class MeshError(WGError):
    """Degenerate or inconsistent mesh geometry."""


class SolverError(WGError):
    """Linear solve failed (Cholesky breakdown or CG non-convergence)."""

    def __init__(self, message, *, residual=None, pivot=None):
        super().__init__(message)
        self.residual = residual
        self.pivot = pivot
