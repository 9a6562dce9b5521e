"""
Single-step transitions of SGD, PCSGD and DiceSGD under greedy deployment.

Every step samples z ~ D(theta_t) at the current iterate and then updates.
States may hold one iterate of shape (d,) or a batch of trial iterates of
shape (n, d); the arithmetic is the same row by row.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..core.operators import UNBOUNDED, Region, clip_rows, project
from ..core.schedules import StepSchedule
from ..errors import InvalidInputError, NumericalFailureError, UnsupportedConfigurationError
from ..models.distributions import DecisionDistribution
from ..models.losses import LossModel
from .streams import as_stream

logger = logging.getLogger("perfclip.algorithms.optimizers")

DICE_DP_MULTIPLIER = math.sqrt(96.0)

ALGORITHMS = ("sgd", "pcsgd", "dicesgd")


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Hyperparameters shared by the three algorithms.

    Attributes:
        schedule: Step sizes gamma_t
        clip_c: PCSGD clipping threshold (inf disables clipping)
        clip_c1: DiceSGD gradient clipping threshold C1
        clip_c2: DiceSGD error clipping threshold C2 (>= C1)
        sigma_dp: Gaussian privacy noise level
        region: Projection region for SGD/PCSGD
        dp_multiplier: Scale applied to sigma_dp by DiceSGD
    """

    schedule: StepSchedule
    clip_c: float = math.inf
    clip_c1: float = 1.0
    clip_c2: float = 1.0
    sigma_dp: float = 0.0
    region: Region = UNBOUNDED
    dp_multiplier: float = DICE_DP_MULTIPLIER

    def __post_init__(self):
        if not self.clip_c > 0:
            raise InvalidInputError(f"clipping threshold must be positive, got {self.clip_c}")
        if not (self.clip_c1 > 0 and self.clip_c2 > 0):
            raise InvalidInputError("DiceSGD thresholds must be positive")
        if self.clip_c2 < self.clip_c1:
            raise InvalidInputError(f"DiceSGD requires C2 >= C1, got C1={self.clip_c1}, C2={self.clip_c2}")
        if not self.sigma_dp >= 0:
            raise InvalidInputError(f"sigma_dp must be nonnegative, got {self.sigma_dp}")
        if not self.dp_multiplier > 0:
            raise InvalidInputError(f"dp_multiplier must be positive, got {self.dp_multiplier}")

    @property
    def noisy(self) -> bool:
        return self.sigma_dp > 0


@dataclass(frozen=True)
class PcsgdState:
    """Iterate of SGD/PCSGD after t steps; grad_norm is the last raw gradient norm."""

    theta: np.ndarray
    t: int = 0
    grad_norm: Union[float, np.ndarray] = 0.0


@dataclass(frozen=True)
class DicesgdState:
    """
    Iterate and clipping-error accumulator of DiceSGD after t steps.

    grad and update hold the last raw gradient and the applied clipped update v.
    """

    theta: np.ndarray
    e: np.ndarray
    t: int = 0
    grad_norm: Union[float, np.ndarray] = 0.0
    grad: Optional[np.ndarray] = field(default=None, repr=False)
    update: Optional[np.ndarray] = field(default=None, repr=False)


def initial_state(algorithm: str, theta0) -> Union[PcsgdState, DicesgdState]:
    theta0 = np.array(theta0, dtype=np.float64)
    if algorithm == "dicesgd":
        return DicesgdState(theta0, np.zeros_like(theta0))
    if algorithm in ("sgd", "pcsgd"):
        return PcsgdState(theta0)
    raise InvalidInputError(f"unknown algorithm '{algorithm}', expected one of {', '.join(ALGORITHMS)}")


def _sample_gradient(state, loss: LossModel, dist: DecisionDistribution, stream, noisy: bool):
    theta = state.theta
    u, zeta = stream.draws(theta.shape, noisy)
    z = dist.draw(theta, u)
    g = loss.grad(theta, z)
    if not np.all(np.isfinite(g)):
        raise NumericalFailureError("non-finite stochastic gradient", state.t + 1)
    return g, zeta


def _projected_step(state: PcsgdState, config: OptimizerConfig, loss, dist, rng, c: float) -> PcsgdState:
    stream = as_stream(rng)
    g, zeta = _sample_gradient(state, loss, dist, stream, config.noisy)
    gamma = config.schedule.value(state.t + 1)

    update, norms = clip_rows(g, c)
    if zeta is not None:
        update = update + config.sigma_dp * zeta
    theta = project(state.theta - gamma * update, config.region)
    return PcsgdState(theta, state.t + 1, norms[..., 0])


def pcsgd_step(state: PcsgdState, config: OptimizerConfig, loss: LossModel, dist: DecisionDistribution, rng) -> PcsgdState:
    """
    theta_{t+1} = P_X(theta_t - gamma_{t+1} (clip_c(grad l(theta_t; z_{t+1})) + zeta_{t+1})).

    Args:
        state: Current iterate
        config: Optimizer hyperparameters (uses clip_c, sigma_dp, region)
        loss: Loss model
        dist: Decision-dependent distribution
        rng: numpy Generator or trial stream

    Raises:
        NumericalFailureError: If the sampled gradient is not finite
    """
    return _projected_step(state, config, loss, dist, rng, config.clip_c)


def sgd_step(state: PcsgdState, config: OptimizerConfig, loss: LossModel, dist: DecisionDistribution, rng) -> PcsgdState:
    """Projected SGD: pcsgd_step with clipping disabled."""
    return _projected_step(state, config, loss, dist, rng, math.inf)


def dicesgd_step(state: DicesgdState, config: OptimizerConfig, loss: LossModel, dist: DecisionDistribution, rng) -> DicesgdState:
    """
    One DiceSGD step.

    v_{t+1} = clip_C1(grad l(theta_t; z_{t+1})) + clip_C2(e_t)
    theta_{t+1} = theta_t - gamma_{t+1} (v_{t+1} + zeta_{t+1})
    e_{t+1} = e_t + grad l(theta_t; z_{t+1}) - v_{t+1}

    Raises:
        UnsupportedConfigurationError: If a bounded region is configured
        NumericalFailureError: If the sampled gradient is not finite
    """
    if config.region.is_bounded:
        raise UnsupportedConfigurationError("DiceSGD is defined for the unconstrained setting only")
    stream = as_stream(rng)
    g, zeta = _sample_gradient(state, loss, dist, stream, config.noisy)
    gamma = config.schedule.value(state.t + 1)

    clipped_g, norms = clip_rows(g, config.clip_c1)
    clipped_e, _ = clip_rows(state.e, config.clip_c2)
    v = clipped_g + clipped_e
    applied = v if zeta is None else v + config.dp_multiplier * config.sigma_dp * zeta

    theta = state.theta - gamma * applied
    e = state.e + g - v
    return DicesgdState(theta, e, state.t + 1, norms[..., 0], g, v)


STEP_FUNCTIONS = {
    "sgd": sgd_step,
    "pcsgd": pcsgd_step,
    "dicesgd": dicesgd_step,
}
