"""
Vector operators shared by every algorithm: parameter validation, the
clipping operator and Euclidean projection onto axis-aligned boxes.

All operators broadcast over leading axes, so a batch of trial iterates of
shape (n, d) goes through the same code as a single vector of shape (d,).
"""
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.typing as npt

from ..errors import InvalidInputError

ParamVector = npt.NDArray[np.float64]


def as_param_vector(values, name: str = "theta") -> ParamVector:
    """
    Convert values to a finite float64 vector.

    Args:
        values: Scalar or array-like coordinates
        name: Name used in error messages

    Returns:
        A 1-D (or batched 2-D) float64 array

    Raises:
        InvalidInputError: If any entry is NaN or infinite
    """
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must have finite entries")
    return arr


def clip(g, c: float) -> np.ndarray:
    """
    Clip a gradient to Euclidean norm at most c: min{1, c/||g||} * g.

    Broadcasts over leading axes, clipping every row independently.
    c = inf disables clipping exactly.
    """
    if not c > 0:
        raise InvalidInputError(f"clipping threshold must be positive, got {c}")
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("cannot clip a non-finite vector")
    return clip_rows(g, c)[0]


def clip_rows(g: np.ndarray, c: float):
    """
    Clip each row of g and also return the row norms.

    No input validation; the step functions check finiteness themselves.

    Returns:
        Tuple of (clipped rows, norms with a trailing axis of size 1)
    """
    norms = np.sqrt(np.sum(g * g, axis=-1, keepdims=True))
    if math.isinf(c):
        return g * 1.0, norms
    # zero rows keep scale 1
    scale = np.minimum(1.0, c / np.where(norms > 0.0, norms, np.inf))
    scale = np.where(norms > 0.0, scale, 1.0)
    return g * scale, norms


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box {x : lower <= x <= upper}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = as_param_vector(self.lower, "lower")
        upper = as_param_vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise InvalidInputError("box bounds must have the same dimension")
        if np.any(lower > upper):
            raise InvalidInputError("box requires lower[i] <= upper[i]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, low: float, high: float, dim: int) -> "BoxRegion":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def is_bounded(self) -> bool:
        return True

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    def corners(self) -> np.ndarray:
        """All 2^d vertices of the box, one per row."""
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def contains(self, theta: np.ndarray) -> bool:
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))


class UnboundedRegion:
    """Sentinel for X = R^d; projection is the identity."""

    is_bounded = False

    def __repr__(self) -> str:
        return "UnboundedRegion()"

    def __eq__(self, other) -> bool:
        return isinstance(other, UnboundedRegion)

    def __hash__(self) -> int:
        return hash("UnboundedRegion")

    def contains(self, theta: np.ndarray) -> bool:
        return True


UNBOUNDED = UnboundedRegion()

Region = Union[BoxRegion, UnboundedRegion]


def project(theta, region: Region) -> np.ndarray:
    """
    Euclidean projection onto a region: coordinate-wise median(lower, theta, upper).

    Raises:
        InvalidInputError: If theta's trailing dimension doesn't match the box
    """
    theta = np.asarray(theta, dtype=np.float64)
    if not region.is_bounded:
        return theta
    if theta.shape[-1] != region.dim:
        raise InvalidInputError(
            f"dimension mismatch: theta has {theta.shape[-1]} coordinates, box has {region.dim}"
        )
    return np.minimum(np.maximum(theta, region.lower), region.upper)
