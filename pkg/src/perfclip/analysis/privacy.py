"""
Gaussian noise calibration for (epsilon, delta)-DP under greedy deployment,
and the step-size and clipping-threshold formulas derived from the
finite-horizon PCSGD bound.

log is the natural logarithm throughout.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

from ..errors import CalibrationError, InvalidInputError, PreconditionError

logger = logging.getLogger("perfclip.analysis.privacy")


@dataclass(frozen=True)
class PrivacyBudget:
    """
    Privacy budget of a run.

    Attributes:
        epsilon: Privacy loss epsilon > 0
        delta: Failure probability in (0, 1)
        m: Database size
        T: Number of iterations
        d: Model dimension
    """

    epsilon: float
    delta: float
    m: int
    T: int
    d: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidInputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.m < 1 or self.T < 1 or self.d < 1:
            raise InvalidInputError("m, T and d must all be >= 1")

    @property
    def epsilon_limit(self) -> float:
        """Largest epsilon covered by the calibration: T / m^2."""
        return self.T / self.m ** 2

    @property
    def within_limit(self) -> bool:
        return self.epsilon <= self.epsilon_limit


def dp_sigma(c: float, budget: PrivacyBudget, strict: bool = True) -> float:
    """
    Noise level sigma_DP = c sqrt(T log(1/delta)) / (m epsilon).

    Args:
        c: Clipping threshold (sensitivity of one clipped gradient)
        budget: Privacy budget
        strict: Raise when epsilon > T/m^2 instead of logging a warning

    Raises:
        CalibrationError: If strict and the budget violates epsilon <= T/m^2
    """
    if not c > 0:
        raise InvalidInputError(f"clipping threshold must be positive, got {c}")
    if not budget.within_limit:
        message = (
            f"epsilon <= T/m^2 violated: epsilon={budget.epsilon:g} > T/m^2={budget.epsilon_limit:g}"
        )
        if strict:
            raise CalibrationError(message)
        logger.warning(f"{message}; calibrating anyway")
    return c * math.sqrt(budget.T * math.log(1.0 / budget.delta)) / (budget.m * budget.epsilon)


def privacy_ratio(budget: PrivacyBudget) -> float:
    """phi = d log(1/delta) / (m^2 epsilon^2)."""
    return budget.d * math.log(1.0 / budget.delta) / (budget.m ** 2 * budget.epsilon ** 2)


def step_size_delta(mu_tilde: float, T: int, c: float, G: float, d: int, sigma_dp: float, initial_gap_sq: float) -> float:
    """Delta(mu) = 2(2(c^2+G^2) + d sigma^2) / (T mu^2 ||theta_0 - theta_PS||^2)."""
    if not mu_tilde > 0:
        raise InvalidInputError(f"mu_tilde must be positive, got {mu_tilde}")
    if T < 1:
        raise InvalidInputError(f"horizon must be >= 1, got {T}")
    if not initial_gap_sq > 0:
        raise InvalidInputError("initial gap must be positive")
    return 2.0 * (2.0 * (c * c + G * G) + d * sigma_dp ** 2) / (T * mu_tilde ** 2 * initial_gap_sq)


def optimal_step_size(
    mu_tilde: float, T: int, c: float, G: float, d: int, sigma_dp: float, initial_gap_sq: float
) -> float:
    """
    Constant step gamma* = log(1/Delta(mu_tilde)) / (mu_tilde T).

    Raises:
        PreconditionError: If G <= c, or Delta(mu_tilde) >= 1 (no step improves the bound)
    """
    if not G > c:
        raise PreconditionError("optimal step size assumes G > c", [f"G={G:g} <= c={c:g}"])
    delta = step_size_delta(mu_tilde, T, c, G, d, sigma_dp, initial_gap_sq)
    if delta >= 1.0:
        raise PreconditionError("degenerate regime", [f"Delta={delta:g} >= 1"])
    gamma = math.log(1.0 / delta) / (mu_tilde * T)
    logger.debug(f"gamma*={gamma:.6g} (Delta={delta:.6g}, mu_tilde={mu_tilde:g}, T={T})")
    return gamma


def naive_step_size(mu: float, T: int, c: float, G: float, d: int, sigma_dp: float, initial_gap_sq: float) -> float:
    """Shift-unaware step: the optimal step with mu in place of mu_tilde."""
    return optimal_step_size(mu, T, c, G, d, sigma_dp, initial_gap_sq)


@dataclass(frozen=True)
class ClipThreshold:
    """Optimal clipping threshold and the deviation scale it achieves."""

    c_star: float
    phi: float
    deviation_scale: Optional[float] = None


def optimal_clip_threshold(
    G: float, m: int, epsilon: float, delta: float, d: int, mu_tilde: Optional[float] = None
) -> ClipThreshold:
    """
    c* = 2 G m^2 eps^2 / (d log(1/delta) + 2 m^2 eps^2).

    Args:
        G: Gradient bound
        m: Database size
        epsilon: Privacy budget
        delta: Failure probability
        d: Model dimension
        mu_tilde: When given, also report the deviation scale G^2/mu_tilde^2 (1 + phi)

    Returns:
        ClipThreshold with c_star, phi and the optional deviation scale
    """
    if not (G > 0 and m > 0 and epsilon > 0 and d > 0):
        raise InvalidInputError("G, m, epsilon and d must be positive")
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    me2 = float(m) ** 2 * epsilon ** 2
    log_term = d * math.log(1.0 / delta)
    c_star = 2.0 * G * me2 / (log_term + 2.0 * me2)
    phi = log_term / me2
    scale = None
    if mu_tilde is not None:
        if not mu_tilde > 0:
            raise InvalidInputError(f"mu_tilde must be positive, got {mu_tilde}")
        scale = G * G / mu_tilde ** 2 * (1.0 + phi)
    return ClipThreshold(c_star, phi, scale)
