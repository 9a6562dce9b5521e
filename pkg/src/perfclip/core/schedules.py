"""
Step-size schedules and the step-size conditions of the strongly convex analysis.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import InvalidInputError

logger = logging.getLogger("perfclip.core.schedules")


@dataclass(frozen=True)
class ConstantSchedule:
    """gamma_t = gamma for all t."""

    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidInputError(f"constant step size must be positive, got {self.gamma}")

    def value(self, t):
        return np.full(np.shape(t), self.gamma, dtype=np.float64) if np.ndim(t) else float(self.gamma)


@dataclass(frozen=True)
class PolynomialSchedule:
    """gamma_t = a0 / (a1 + t)."""

    a0: float
    a1: float = 0.0

    def __post_init__(self):
        if not self.a0 > 0:
            raise InvalidInputError(f"a0 must be positive, got {self.a0}")
        if not self.a1 >= 0:
            raise InvalidInputError(f"a1 must be nonnegative, got {self.a1}")

    def value(self, t):
        if np.ndim(t):
            return self.a0 / (self.a1 + np.asarray(t, dtype=np.float64))
        return self.a0 / (self.a1 + t)


@dataclass(frozen=True)
class TheoreticalOptimalSchedule:
    """
    Constant step size minimising the finite-horizon PCSGD bound.

    gamma* = log(1/Delta(mu_tilde)) / (mu_tilde * T) with
    Delta = 2(2(c^2+G^2) + d sigma_dp^2) / (T mu_tilde^2 ||theta_0 - theta_PS||^2).
    Passing the plain strong-convexity modulus as mu_tilde gives the shift-unaware step.
    """

    mu_tilde: float
    horizon: int
    c: float
    G: float
    d: int
    sigma_dp: float
    initial_gap_sq: float
    gamma: float = field(init=False)

    def __post_init__(self):
        from ..analysis.privacy import optimal_step_size

        gamma = optimal_step_size(
            self.mu_tilde, self.horizon, self.c, self.G, self.d, self.sigma_dp, self.initial_gap_sq
        )
        object.__setattr__(self, "gamma", gamma)

    def value(self, t):
        return np.full(np.shape(t), self.gamma, dtype=np.float64) if np.ndim(t) else float(self.gamma)


StepSchedule = Union[ConstantSchedule, PolynomialSchedule, TheoreticalOptimalSchedule]


def schedule_value(schedule: StepSchedule, t: int) -> float:
    """Return gamma_t for t >= 1."""
    if t < 1:
        raise InvalidInputError(f"step index must be >= 1, got {t}")
    return float(schedule.value(t))


def schedule_values(schedule: StepSchedule, ts) -> np.ndarray:
    """Vectorised gamma_t over an array of step indices (all >= 1)."""
    ts = np.asarray(ts, dtype=np.float64)
    if ts.size and ts.min() < 1:
        raise InvalidInputError("step indices must be >= 1")
    return np.asarray(schedule.value(ts), dtype=np.float64)


@dataclass(frozen=True)
class ScheduleReport:
    """Outcome of a step-size condition scan."""

    passed: bool
    violating_t: Optional[int] = None
    condition: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


def validate_schedule_scvx(schedule: StepSchedule, mu_tilde: float, horizon: int) -> ScheduleReport:
    """
    Scan t = 1..horizon for the strongly convex step conditions.

    (i)  gamma_{t-1} / gamma_t <= 1 + (mu_tilde / 2) gamma_t   (t >= 2)
    (ii) gamma_t <= 2 / mu_tilde

    Violations are reported, not raised.
    """
    if not mu_tilde > 0:
        raise InvalidInputError(f"mu_tilde must be positive, got {mu_tilde}")
    if horizon < 1:
        return ScheduleReport(True)

    gammas = schedule_values(schedule, np.arange(1, horizon + 1))
    ratio_ok = np.ones(horizon, dtype=bool)
    ratio_ok[1:] = gammas[:-1] / gammas[1:] <= 1.0 + 0.5 * mu_tilde * gammas[1:]
    bound_ok = gammas <= 2.0 / mu_tilde

    bad = np.flatnonzero(~(ratio_ok & bound_ok))
    if bad.size == 0:
        return ScheduleReport(True)
    idx = int(bad[0])
    condition = "ii" if not bound_ok[idx] else "i"
    logger.debug(f"Schedule {schedule} violates condition ({condition}) at t={idx + 1}")
    return ScheduleReport(False, idx + 1, condition)
