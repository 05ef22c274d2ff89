"""Exception types shared across the package."""


class WgError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(WgError):
    """Invalid or inconsistent configuration input."""


class IntegrationError(WgError):
    """Numerical failure during time evolution (NaN/Inf or positivity loss)."""


class FitConvergenceError(WgError):
    """Nonlinear least squares failed to converge."""


class DegenerateBranchError(WgError):
    """Root bracketing impossible because the two curves coincide."""
