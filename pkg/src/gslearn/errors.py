"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: config errors exit with 2,
capacity errors with 3, convergence errors with 4.
"""


class GslearnError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GslearnError):
    """Invalid or inconsistent configuration / input description."""


class CapacityError(GslearnError):
    """A requested problem size exceeds a configured capacity."""


class FeatureBlowupError(CapacityError):
    """A per-Pauli cell grid exceeded the configured cap.

    Raised when (2/delta2 + 1)^|I_P| grows past the cell cap; the fix is a
    smaller delta1 or a larger delta2.
    """


class ConvergenceError(GslearnError):
    """An iterative solver failed to converge.

    Carries optional diagnostics (iteration counts, residuals, traces) in
    ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class DensityError(ConfigError):
    """A supplied probability density is invalid (non-normalized,
    non-positive, or its tabulated CDF is not monotone)."""
