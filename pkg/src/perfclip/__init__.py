"""
perfclip - clipped SGD under decision-dependent distributions.

This package simulates projected clipped SGD (optionally differentially
private) and the error-feedback variant DiceSGD when the data distribution
reacts to the deployed model, and evaluates the convergence bounds and
reference solutions those runs are compared against.
"""

__version__ = "0.1.0"

from .config import Settings
from .errors import PerfclipError

__all__ = [
    "Settings",
    "PerfclipError",
    "__version__",
]
