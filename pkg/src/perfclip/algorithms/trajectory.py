"""
Trajectory runner and recorder.

A batch of trials is advanced in lockstep; each row owns its own random
stream. Rows whose iterate norm passes the divergence threshold are frozen
and flagged, and record NaN from then on.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import DivergenceError, InvalidInputError
from ..models.datasets import FiniteDatabase
from ..models.distributions import DatabaseShift, DecisionDistribution, expected_grad, performative_risk
from ..models.losses import LossModel
from .optimizers import STEP_FUNCTIONS, DicesgdState, OptimizerConfig, initial_state
from .streams import as_stream

logger = logging.getLogger("perfclip.algorithms.trajectory")

DIVERGENCE_THRESHOLD = 1e12

SERIES = ("distance_sq", "grad_norm_sq", "e_norm_sq", "shadow_distance_sq", "performative_risk", "tpr", "tnr")


@dataclass
class TrialResult:
    """Recorded series of one trial."""

    algorithm: str
    trial: int
    t: np.ndarray
    series: Dict[str, np.ndarray]
    final_theta: np.ndarray
    diverged: bool = False
    diverged_at: Optional[int] = None
    max_grad_norm: float = 0.0
    max_e_norm: float = 0.0


@dataclass
class TrajectoryRecorder:
    """
    Computes the recorded metrics of a batch of iterates every `thinning` steps.

    Args:
        loss: Loss model
        dist: Distribution the run samples from
        theta_ref: Oracle point for distance series (theta_PS or theta_inf), if known
        test_db: Held-out labelled database for true positive/negative rates
        thinning: Record every k-th step
        series: Restrict to these series names (default: all that apply)
    """

    loss: LossModel
    dist: DecisionDistribution
    theta_ref: Optional[np.ndarray] = None
    test_db: Optional[FiniteDatabase] = None
    thinning: int = 1
    series: Optional[Sequence[str]] = None
    _exact: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.thinning < 1:
            raise InvalidInputError(f"thinning must be >= 1, got {self.thinning}")
        if self.series is not None:
            unknown = set(self.series) - set(SERIES)
            if unknown:
                raise InvalidInputError(f"unknown series: {', '.join(sorted(unknown))}")
        if self.theta_ref is not None:
            self.theta_ref = np.atleast_1d(np.asarray(self.theta_ref, dtype=np.float64))
        origin = np.zeros((1, self.loss.dim))
        self._exact = self.dist.support(origin) is not None

    def names(self, algorithm: str) -> List[str]:
        wanted = []
        if self.theta_ref is not None:
            wanted.append("distance_sq")
        if self._exact:
            wanted += ["grad_norm_sq", "performative_risk"]
        if algorithm == "dicesgd":
            wanted.append("e_norm_sq")
            if self.theta_ref is not None:
                wanted.append("shadow_distance_sq")
        if self.test_db is not None:
            wanted += ["tpr", "tnr"]
        if self.series is not None:
            wanted = [name for name in wanted if name in self.series]
        return wanted

    def record(self, names: Sequence[str], state, gamma: float) -> Dict[str, np.ndarray]:
        theta = state.theta
        out = {}
        if "distance_sq" in names:
            out["distance_sq"] = np.sum((theta - self.theta_ref) ** 2, axis=-1)
        if "grad_norm_sq" in names:
            grad = expected_grad(self.dist, self.loss, theta)
            out["grad_norm_sq"] = np.sum(grad * grad, axis=-1)
        if "performative_risk" in names:
            out["performative_risk"] = performative_risk(self.dist, self.loss, theta)
        if "e_norm_sq" in names:
            out["e_norm_sq"] = np.sum(state.e * state.e, axis=-1)
        if "shadow_distance_sq" in names:
            shadow = theta - gamma * state.e - self.theta_ref
            out["shadow_distance_sq"] = np.sum(shadow * shadow, axis=-1)
        if "tpr" in names or "tnr" in names:
            tpr, tnr = self.classification_rates(theta)
            out["tpr"], out["tnr"] = tpr, tnr
        return out

    def classification_rates(self, theta):
        """True positive and true negative rates on the test set after it responds to theta."""
        records = self.test_db.records
        if isinstance(self.dist, DatabaseShift):
            records = self.dist.shift(records, theta[..., None, :])
        records = np.broadcast_to(records, theta.shape[:-1] + self.test_db.records.shape)
        x, y = records[..., :-1], records[..., -1]
        predicted = np.sum(x * theta[..., None, :], axis=-1) >= 0.0
        positives = y == 1.0
        n_pos = np.maximum(np.sum(positives, axis=-1), 1)
        n_neg = np.maximum(np.sum(~positives, axis=-1), 1)
        tpr = np.sum(predicted & positives, axis=-1) / n_pos
        tnr = np.sum(~predicted & ~positives, axis=-1) / n_neg
        return tpr, tnr


def run_batch(
    algorithm: str,
    config: OptimizerConfig,
    loss: LossModel,
    dist: DecisionDistribution,
    T: int,
    rng,
    recorder: TrajectoryRecorder,
    theta0,
    trials: Optional[Sequence[int]] = None,
    raise_on_divergence: bool = False,
) -> List[TrialResult]:
    """
    Advance a batch of trials T steps and record every recorder.thinning steps.

    Args:
        algorithm: "sgd", "pcsgd" or "dicesgd"
        config: Optimizer hyperparameters
        loss: Loss model
        dist: Distribution
        T: Number of steps
        rng: numpy Generator or TrialStreams serving the batch rows
        recorder: Metric recorder
        theta0: Initial iterate, shape (d,) broadcast to every row or (n, d)
        trials: Global trial indices for the rows (default 0..n-1)
        raise_on_divergence: Raise DivergenceError instead of flagging the row

    Returns:
        One TrialResult per row
    """
    if algorithm not in STEP_FUNCTIONS:
        raise InvalidInputError(f"unknown algorithm '{algorithm}'")
    if T < 0:
        raise InvalidInputError(f"horizon must be nonnegative, got {T}")
    step = STEP_FUNCTIONS[algorithm]
    stream = as_stream(rng)

    theta0 = np.asarray(theta0, dtype=np.float64)
    if trials is not None:
        n = len(trials)
    elif theta0.ndim == 2:
        n = theta0.shape[0]
    else:
        n = len(stream) if hasattr(stream, "__len__") else 1
    theta0 = np.broadcast_to(np.atleast_2d(theta0), (n, loss.dim)).copy()
    trials = list(trials) if trials is not None else list(range(n))

    state = initial_state(algorithm, theta0)
    names = recorder.names(algorithm)
    k = recorder.thinning
    n_records = T // k + 1
    t_axis = np.arange(n_records, dtype=np.int64) * k
    series = {name: np.full((n, n_records), np.nan) for name in names}

    alive = np.ones(n, dtype=bool)
    diverged_at = np.full(n, -1, dtype=np.int64)
    max_grad = np.zeros(n)
    max_e = np.zeros(n)

    def _record(slot: int, st, t: int):
        gamma = float(config.schedule.value(t)) if t >= 1 else 0.0
        values = recorder.record(names, st, gamma)
        for name, value in values.items():
            series[name][:, slot] = np.where(alive, value, np.nan)

    with np.errstate(over="ignore", invalid="ignore"):
        _record(0, state, 0)
        for t in range(1, T + 1):
            previous = state
            state = step(state, config, loss, dist, stream)
            max_grad = np.where(alive, np.maximum(max_grad, state.grad_norm), max_grad)

            norms = np.sqrt(np.sum(state.theta * state.theta, axis=-1))
            blown = alive & ~(norms <= DIVERGENCE_THRESHOLD)
            if blown.any():
                if raise_on_divergence:
                    row = int(np.flatnonzero(blown)[0])
                    raise DivergenceError(
                        f"iterate norm exceeded {DIVERGENCE_THRESHOLD:.0e} in trial {trials[row]}", t, float(norms[row])
                    )
                alive &= ~blown
                diverged_at[blown] = t
                logger.debug(f"{int(blown.sum())} trial(s) of {algorithm} diverged at step {t}")

            if not alive.all():
                state = _freeze(state, previous, alive)
            if isinstance(state, DicesgdState):
                e_norm = np.sqrt(np.sum(state.e * state.e, axis=-1))
                max_e = np.where(alive, np.maximum(max_e, e_norm), max_e)
            if t % k == 0:
                _record(t // k, state, t)

    results = []
    for row in range(n):
        results.append(
            TrialResult(
                algorithm=algorithm,
                trial=trials[row],
                t=t_axis.copy(),
                series={name: values[row].copy() for name, values in series.items()},
                final_theta=state.theta[row].copy(),
                diverged=not alive[row],
                diverged_at=int(diverged_at[row]) if not alive[row] else None,
                max_grad_norm=float(max_grad[row]),
                max_e_norm=float(max_e[row]),
            )
        )
    return results


def _freeze(state, previous, alive):
    """Keep diverged rows at their last iterate below the threshold."""
    keep = alive[:, None]
    theta = np.where(keep, state.theta, previous.theta)
    if isinstance(state, DicesgdState):
        e = np.where(keep, state.e, previous.e)
        return DicesgdState(theta, e, state.t, state.grad_norm, state.grad, state.update)
    return type(state)(theta, state.t, state.grad_norm)


def run_trajectory(
    algorithm: str,
    config: OptimizerConfig,
    loss: LossModel,
    dist: DecisionDistribution,
    T: int,
    rng,
    recorder: TrajectoryRecorder,
    theta0,
    trial: int = 0,
    raise_on_divergence: bool = True,
) -> TrialResult:
    """
    Run one trial for T steps from theta0.

    Raises:
        DivergenceError: If the iterate norm exceeds 1e12 (unless raise_on_divergence is False)
        NumericalFailureError: If a gradient stops being finite
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    if theta0.ndim != 1:
        raise InvalidInputError("run_trajectory takes a single initial iterate")
    return run_batch(
        algorithm, config, loss, dist, T, rng, recorder, theta0[None, :], [trial], raise_on_divergence
    )[0]
