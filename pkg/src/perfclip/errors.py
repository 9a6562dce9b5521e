"""
Exception hierarchy for the perfclip simulator.
"""
from typing import List, Optional


class PerfclipError(Exception):
    """Base class for all simulator errors."""
    category = "error"


class InvalidInputError(PerfclipError, ValueError):
    """Exception raised for arguments outside an operation's domain."""
    category = "invalid-input"


class UnsupportedOperationError(PerfclipError):
    """Exception raised when an object cannot provide the requested operation."""
    category = "unsupported-operation"


class UnsupportedConfigurationError(PerfclipError):
    """Exception raised for algorithm/region combinations that are not defined."""
    category = "unsupported-configuration"


class NumericalFailureError(PerfclipError):
    """Exception raised when an iterate or gradient stops being finite."""
    category = "numerical"

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DivergenceError(NumericalFailureError):
    """Exception raised when an iterate norm passes the divergence threshold."""
    category = "divergence"

    def __init__(self, message: str, step: Optional[int] = None, norm: float = float("nan")):
        super().__init__(message, step)
        self.norm = norm


class NonConvergenceError(PerfclipError):
    """Exception raised when an oracle solver exhausts its iteration budget."""
    category = "non-convergence"

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class IllPosedError(PerfclipError):
    """Exception raised when a closed form has no finite solution."""
    category = "ill-posed"


class PreconditionError(PerfclipError):
    """Exception raised when a theorem's hypotheses are not met by the inputs."""
    category = "precondition"

    def __init__(self, message: str, failed: Optional[List[str]] = None):
        self.failed = list(failed or [])
        if self.failed:
            message = f"{message}: {', '.join(self.failed)}"
        super().__init__(message)


class CalibrationError(PerfclipError):
    """Exception raised when a privacy budget cannot be calibrated."""
    category = "calibration"


class FitError(PerfclipError):
    """Exception raised when a decay exponent cannot be fitted."""
    category = "fit"


class ConfigError(PerfclipError):
    """Exception raised for invalid or unknown configuration entries."""
    category = "config"

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class StorageError(PerfclipError):
    """Exception raised when a file cannot be read or written."""
    category = "io"

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = path
