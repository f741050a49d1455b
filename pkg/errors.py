"""
Error types for the Cascade Node simulator
Library code raises these; the CLI maps them to exit codes
"""

from typing import Optional, Sequence, Tuple


class CascadeNodeError(Exception):
    """Base class for all simulator errors"""

    exit_code = 1


class ConfigValidationError(CascadeNodeError, ValueError):
    """A node configuration or input field failed validation"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class GridMismatchError(CascadeNodeError, ValueError):
    """Two pulses were combined on different time grids"""


class GridSizeError(CascadeNodeError, ValueError):
    """A parameter sweep exceeds the configured point guard"""


class TargetRangeError(CascadeNodeError, ValueError):
    """A requested coupling rate is outside the achievable table range"""

    def __init__(self, target: float, bounds: Tuple[float, float]):
        self.target = target
        self.bounds = bounds
        super().__init__(
            f"target rate {target:.6g} outside achievable range [{bounds[0]:.6g}, {bounds[1]:.6g}]"
        )


class NumericalError(CascadeNodeError, ArithmeticError):
    """Numerical failure inside the solvers"""

    exit_code = 2


class DegenerateSpectrumError(NumericalError):
    """Eigenvalues too close for the residue formula"""

    def __init__(self, min_separation: float, threshold: float):
        self.min_separation = min_separation
        self.threshold = threshold
        super().__init__(
            f"degenerate spectrum: min eigenvalue separation {min_separation:.3e} <= {threshold:.1e}"
        )


class EigenSolverError(NumericalError):
    """Eigensolver failed or returned a defective basis"""

    def __init__(self, message: str, condition: Optional[float] = None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (eigenvector condition estimate {condition:.3e})"
        super().__init__(message)


class IntegrationError(NumericalError):
    """The ODE integrator stopped before the end of the window"""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} at t={time:.6g}")


class DataFileError(CascadeNodeError, OSError):
    """An input data file is missing, empty or malformed"""

    exit_code = 3

    def __init__(self, path: str, message: str, missing: Sequence[str] = ()):
        self.path = path
        self.missing = tuple(missing)
        super().__init__(f"{path}: {message}")
