"""Exception types shared across the package."""


class WavescatterError(Exception):
    """Base class for all package errors."""


class DomainError(WavescatterError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class DivergenceError(WavescatterError, ArithmeticError):
    """A norm or integral failed to converge."""


class AccuracyError(WavescatterError, ArithmeticError):
    """A numerical extrapolation left a residual above tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ResolutionError(WavescatterError, ValueError):
    """A grid is too coarse for the requested frequency or oscillation."""


class SingularityError(WavescatterError, ValueError):
    """A kernel was evaluated at its singular point."""


class NearEigenvalueError(WavescatterError, ArithmeticError):
    """A resolvent solve is ill-conditioned because the energy is close to an eigenvalue."""

    def __init__(self, message: str, condition: float, distance: float | None = None):
        extra = "" if distance is None else f", distance to nearest eigenvalue {distance:.3e}"
        super().__init__(f"{message} (condition {condition:.3e}{extra})")
        self.condition = condition
        self.distance = distance


class SingularFamilyError(WavescatterError, ArithmeticError):
    """I + T1(eta) is numerically singular at some frequency."""

    def __init__(self, message: str, eta):
        super().__init__(f"{message} at eta={tuple(float(c) for c in eta)}")
        self.eta = eta


class ContractError(WavescatterError, ValueError):
    """Two kernel families do not share a frequency grid, point set, or branch."""


class GrowthError(WavescatterError, OverflowError):
    """A Born term overflows floating point range."""

    def __init__(self, message: str, norm: float):
        super().__init__(f"{message} (per-frequency norm {norm:.3e})")
        self.norm = norm


class StepSizeError(WavescatterError, ValueError):
    """A time step aliases the kinetic phase at the grid Nyquist frequency."""


class BandLimitError(WavescatterError, ValueError):
    """A function carries Fourier mass outside the frequency grid range."""


class NonConvergenceError(WavescatterError, ArithmeticError):
    """A time limit failed to settle along its schedule."""

    def __init__(self, message: str, residuals):
        super().__init__(f"{message}; residuals {list(residuals)}")
        self.residuals = list(residuals)


class ConfigError(WavescatterError, ValueError):
    """A configuration file could not be parsed or validated."""
