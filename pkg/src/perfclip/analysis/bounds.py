"""
Right-hand sides of the convergence bounds for PCSGD and DiceSGD.

No evaluator fills in a physical constant on its own: every constant is an
explicit field, supplied by the caller or measured by the harness.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..core.schedules import (
    ConstantSchedule,
    PolynomialSchedule,
    StepSchedule,
    schedule_values,
    validate_schedule_scvx,
)
from ..errors import InvalidInputError, PreconditionError

logger = logging.getLogger("perfclip.analysis.bounds")


def _check_nonnegative(**values) -> None:
    bad = [name for name, value in values.items() if value is None or not value >= 0 or not math.isfinite(value)]
    if bad:
        raise InvalidInputError(f"constants must be finite and nonnegative: {', '.join(bad)}")


# Strongly convex PCSGD

@dataclass(frozen=True)
class ScvxBoundParams:
    """
    Constants of the strongly convex PCSGD bound.

    Attributes:
        mu_tilde: mu - L beta (must be positive)
        c: Clipping threshold
        G: Gradient bound
        d: Model dimension
        sigma_dp: Privacy noise level
        initial_gap_sq: ||theta_0 - theta_PS||^2
        schedule: Step sizes
    """

    mu_tilde: float
    c: float
    G: float
    d: int
    sigma_dp: float
    initial_gap_sq: float
    schedule: StepSchedule

    def __post_init__(self):
        if not self.mu_tilde > 0:
            raise PreconditionError("strongly convex bound", [f"beta < mu/L (mu_tilde={self.mu_tilde:g})"])
        _check_nonnegative(c=self.c, G=self.G, sigma_dp=self.sigma_dp, initial_gap_sq=self.initial_gap_sq)

    @property
    def c1(self) -> float:
        return 2.0 * (self.c ** 2 + self.G ** 2) + self.d * self.sigma_dp ** 2

    @property
    def C1(self) -> float:
        return max(self.G - self.c, 0.0) ** 2


def bias_upper_scvx(params: ScvxBoundParams) -> float:
    """Non-vanishing clipping bias term 8 max(G - c, 0)^2 / mu_tilde^2."""
    return 8.0 * params.C1 / params.mu_tilde ** 2


def thm1_curve(params: ScvxBoundParams, ts) -> np.ndarray:
    """
    Vectorised strongly convex PCSGD bound at each t in ts:

    prod_{i=1}^{t+1} |1 - mu_tilde gamma_i| gap_0 + (2 c1 / mu_tilde) gamma_{t+1} + 8 C1 / mu_tilde^2

    Raises:
        PreconditionError: If the schedule fails the step-size conditions up to max(ts) + 1
    """
    ts = np.asarray(ts, dtype=np.int64)
    if ts.size == 0:
        return np.zeros(0)
    if ts.min() < 0:
        raise InvalidInputError("bound times must be nonnegative")
    horizon = int(ts.max()) + 1
    report = validate_schedule_scvx(params.schedule, params.mu_tilde, horizon)
    if not report:
        raise PreconditionError(
            "schedule fails the strongly convex step conditions",
            [f"condition ({report.condition}) at t={report.violating_t}"],
        )
    gammas = schedule_values(params.schedule, np.arange(1, horizon + 1))
    factors = np.abs(1.0 - params.mu_tilde * gammas)
    with np.errstate(divide="ignore"):
        log_prod = np.cumsum(np.log(factors))
    contraction = np.exp(log_prod[ts]) * params.initial_gap_sq
    return contraction + 2.0 * params.c1 / params.mu_tilde * gammas[ts] + bias_upper_scvx(params)


def thm1_rhs(params: ScvxBoundParams, t: int) -> float:
    """Strongly convex PCSGD bound on E||theta_{t+1} - theta_PS||^2 at a single t."""
    return float(thm1_curve(params, [t])[0])


# Non-convex PCSGD

@dataclass(frozen=True)
class NcvxBoundParams:
    """
    Constants of the non-convex PCSGD bound.

    loss_max doubles as the Lipschitz constant of the loss in the distribution
    argument. schedule=None means the constant step 1/sqrt(T).
    """

    delta0: float
    L: float
    sigma0: float
    sigma1: float
    loss_max: float
    beta: float
    c: float
    G: float
    schedule: Optional[StepSchedule] = None
    sigma_dp: float = 0.0

    def __post_init__(self):
        _check_nonnegative(
            delta0=self.delta0, L=self.L, sigma0=self.sigma0, sigma1=self.sigma1,
            loss_max=self.loss_max, beta=self.beta, c=self.c, G=self.G, sigma_dp=self.sigma_dp,
        )


def ncvx_bias(params: NcvxBoundParams) -> float:
    """b(beta, c) = l_max beta (sqrt(sigma0^2 + sigma_dp^2) + 8 (1 + sigma1^2) l_max beta) + 2 max(G - c, 0)^2."""
    shift = params.loss_max * params.beta * (
        math.sqrt(params.sigma0 ** 2 + params.sigma_dp ** 2) + 8.0 * (1.0 + params.sigma1 ** 2) * params.loss_max * params.beta
    )
    return shift + 2.0 * max(params.G - params.c, 0.0) ** 2


@dataclass(frozen=True)
class NcvxBound:
    """Values of the non-convex PCSGD bound after T steps."""

    summed: float
    weighted_average: float
    sqrt_specialization: float
    b: float


def thm3_rhs(params: NcvxBoundParams, T: int) -> NcvxBound:
    """
    Non-convex PCSGD bound.

    summed:  8 Delta0 + 4 L (sigma0^2 + sigma_dp^2) sum gamma^2 + 8 b sum gamma, bounding
             sum_t gamma_{t+1} E||grad f(theta_t; theta_t)||^2
    weighted_average: summed / sum gamma, bounding the gamma-weighted average (and the minimum)
    sqrt_specialization: 8 (Delta0 + L (sigma0^2 + sigma_dp^2) / 2) / sqrt(T) + 8 b

    Raises:
        PreconditionError: If some gamma_t > 1 / (2 (1 + sigma1^2)) for t <= T
    """
    if T < 1:
        raise InvalidInputError(f"horizon must be >= 1, got {T}")
    schedule = params.schedule if params.schedule is not None else ConstantSchedule(1.0 / math.sqrt(T))
    gammas = schedule_values(schedule, np.arange(1, T + 1))
    limit = 1.0 / (2.0 * (1.0 + params.sigma1 ** 2))
    if gammas.max() > limit:
        first = int(np.flatnonzero(gammas > limit)[0]) + 1
        raise PreconditionError("non-convex step condition", [f"gamma_{first}={gammas[first - 1]:g} > {limit:g}"])

    b = ncvx_bias(params)
    noise = params.sigma0 ** 2 + params.sigma_dp ** 2
    summed = 8.0 * params.delta0 + 4.0 * params.L * noise * float(np.sum(gammas ** 2)) + 8.0 * b * float(np.sum(gammas))
    sqrt_spec = 8.0 * (params.delta0 + 0.5 * params.L * noise) / math.sqrt(T) + 8.0 * b
    return NcvxBound(summed, summed / float(np.sum(gammas)), sqrt_spec, b)


# Strongly convex DiceSGD

@dataclass(frozen=True)
class DiceBoundParams:
    """
    Constants of the strongly convex DiceSGD bound on E||theta_t - gamma_t e_t - theta_PS||^2.

    G and B bound the second moment E||grad l||^2 <= G^2 + B^2 ||theta - theta_PS||^2;
    M bounds E||e_t||^2 <= M^2; b and b_bar are the step-size constants.
    """

    mu_tilde: float
    G: float
    B: float
    d: int
    sigma_dp: float
    L: float
    M: float
    beta: float
    b: float
    b_bar: float
    initial_gap_sq: float
    schedule: StepSchedule

    def __post_init__(self):
        if not self.mu_tilde > 0:
            raise PreconditionError("DiceSGD bound", [f"beta < mu/L (mu_tilde={self.mu_tilde:g})"])
        _check_nonnegative(
            G=self.G, B=self.B, sigma_dp=self.sigma_dp, L=self.L, M=self.M, beta=self.beta,
            b_bar=self.b_bar, initial_gap_sq=self.initial_gap_sq,
        )
        if not self.b > 0:
            raise InvalidInputError(f"step constant b must be positive, got {self.b}")


def check_dice_schedule(params: DiceBoundParams, horizon: int) -> List[str]:
    """Names of the DiceSGD step conditions (i)-(iii) that fail for t <= horizon."""
    failed = []
    schedule = params.schedule
    if not isinstance(schedule, PolynomialSchedule) or schedule.a0 < 1.0 / params.b:
        failed.append("(i) gamma_t = a0/(a1 + t) with a0 >= 1/b")

    gammas = schedule_values(schedule, np.arange(1, horizon + 2))
    cap = min(params.mu_tilde / (16.0 * params.b), 8.0 / params.mu_tilde)
    if params.B > 0:
        cap = min(cap, params.mu_tilde / (4.0 * params.B ** 2))
    if gammas.max() > cap:
        failed.append(f"(ii) gamma_t <= {cap:g}")

    ratio_ok = gammas[:-1] ** 2 / gammas[1:] ** 2 <= 1.0 + params.b_bar * gammas[1:] ** 2
    if not np.all(ratio_ok):
        t_bad = int(np.flatnonzero(~ratio_ok)[0]) + 1
        failed.append(f"(iii) gamma_t^2/gamma_(t+1)^2 <= 1 + b_bar gamma_(t+1)^2 (fails at t={t_bad})")
    return failed


def thm4_curve(params: DiceBoundParams, ts) -> np.ndarray:
    """
    Vectorised strongly convex DiceSGD bound at each t in ts.

    Raises:
        PreconditionError: Listing which step conditions fail up to max(ts) + 1
    """
    ts = np.asarray(ts, dtype=np.int64)
    if ts.size == 0:
        return np.zeros(0)
    horizon = int(ts.max()) + 1
    failed = check_dice_schedule(params, horizon)
    if failed:
        raise PreconditionError("DiceSGD step conditions fail", failed)

    mu = params.mu_tilde
    gammas = schedule_values(params.schedule, np.arange(1, horizon + 1))
    with np.errstate(divide="ignore"):
        log_prod = np.cumsum(np.log(np.abs(1.0 - 0.25 * mu * gammas)))
    g = gammas[ts]
    lm = params.L ** 2 * params.M ** 2 * (1.0 + params.beta) ** 2
    return (
        np.exp(log_prod[ts]) * params.initial_gap_sq
        + 8.0 * (params.G ** 2 + params.d * params.sigma_dp ** 2) / mu * g
        + 16.0 * lm / mu ** 2 * g ** 2
        + 24.0 * params.b ** 2 * params.M ** 2 / mu * g ** 3
        + 16.0 * lm * params.b_bar / mu ** 2 * g ** 4
    )


def thm4_rhs(params: DiceBoundParams, t: int) -> float:
    """Strongly convex DiceSGD bound at a single t."""
    return float(thm4_curve(params, [t])[0])


def thm4_leading_term(params: DiceBoundParams, t: int) -> float:
    """The O(gamma_{t+1}) term 8 (G^2 + d sigma^2) / mu_tilde gamma_{t+1}."""
    gamma = float(params.schedule.value(t + 1))
    return 8.0 * (params.G ** 2 + params.d * params.sigma_dp ** 2) / params.mu_tilde * gamma


# Non-convex DiceSGD

def dice_ncvx_bias(C1: float, C2: float, sigma_dp: float, loss_max: float, d: int) -> float:
    """b = 4 l_max (C1 + C2 + sqrt(d) sigma_dp)."""
    return 4.0 * loss_max * (C1 + C2 + math.sqrt(d) * sigma_dp)


def thm5_rhs(
    C1: float,
    C2: float,
    sigma_dp: float,
    loss_max: float,
    beta: float,
    d: int,
    delta0: float,
    L: float,
    sigma0: float,
    sigma1: float,
    M: float,
    T: int,
) -> float:
    """
    Non-convex DiceSGD bound with gamma = 1/sqrt(T):

    4 Delta0 / (T gamma) + b beta + 2 L gamma (sigma_dp^2 + sigma0^2) + 2 L^2 M^2 gamma^2

    Raises:
        PreconditionError: If gamma > 1 / (2 L (1 + sigma1^2))
    """
    _check_nonnegative(
        C1=C1, C2=C2, sigma_dp=sigma_dp, loss_max=loss_max, beta=beta,
        delta0=delta0, L=L, sigma0=sigma0, sigma1=sigma1, M=M,
    )
    if T < 1:
        raise InvalidInputError(f"horizon must be >= 1, got {T}")
    gamma = 1.0 / math.sqrt(T)
    limit = 1.0 / (2.0 * L * (1.0 + sigma1 ** 2)) if L > 0 else math.inf
    if gamma > limit:
        raise PreconditionError("non-convex DiceSGD step condition", [f"gamma={gamma:g} > {limit:g}"])
    b = dice_ncvx_bias(C1, C2, sigma_dp, loss_max, d)
    return (
        4.0 * delta0 / (T * gamma)
        + b * beta
        + 2.0 * L * gamma * (sigma_dp ** 2 + sigma0 ** 2)
        + 2.0 * L ** 2 * M ** 2 * gamma ** 2
    )
