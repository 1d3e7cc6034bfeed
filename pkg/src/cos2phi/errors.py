"""Exception types shared across the package."""


class QubitModelError(Exception):
    """Base class for all package-specific errors."""


class InvalidArmError(QubitModelError):
    """A composite junction arm has no Josephson energy at all."""


class DecompositionError(QubitModelError):
    """Fourier coefficients failed to stabilise within the grid cap."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NumericalError(QubitModelError):
    """Eigensolver or quadrature failed to converge."""


class TruncationError(QubitModelError):
    """A truncated basis is too small for the requested states."""


class DivergenceError(QubitModelError):
    """A formula was evaluated at a pole (e.g. zero qubit-resonator detuning)."""


class ConditioningError(QubitModelError):
    """Input vectors/matrices are too close to singular."""


class InsufficientPeriodicityError(QubitModelError):
    """A heatmap does not contain enough repeated features to extract a lattice."""


class ConfigError(QubitModelError):
    """Invalid or missing configuration values."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class UsageError(QubitModelError):
    """Bad command-line usage (maps to exit code 2)."""
