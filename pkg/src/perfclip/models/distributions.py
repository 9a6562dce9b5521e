"""
Decision-dependent distributions z ~ D(theta) and exact expectations over them.

Sampling is inverse-transform: every distribution maps the deployed model and
one uniform variate per draw to a sample, so a batch of trials can share a
single vectorised call while each trial consumes its own random stream.
"""
import logging
from typing import NamedTuple, Optional

import numpy as np

from ..core.operators import clip_rows
from ..errors import InvalidInputError, UnsupportedOperationError
from .datasets import FiniteDatabase
from .losses import LossModel

logger = logging.getLogger("perfclip.models.distributions")


class Support(NamedTuple):
    """Enumerable law: points of shape (..., k, sample_dim) with probabilities (..., k)."""

    points: np.ndarray
    probs: np.ndarray


class DecisionDistribution:
    """
    Base class for samplers z ~ D(theta) with declared sensitivity beta.
    """

    beta: float = 0.0
    sample_dim: int = 1

    def draw(self, theta, u) -> np.ndarray:
        """Map theta (..., d) and uniforms u (...) in [0, 1) to samples (..., sample_dim)."""
        raise NotImplementedError

    def sample(self, theta, rng: np.random.Generator) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return self.draw(theta, rng.random(theta.shape[:-1]))

    def support(self, theta) -> Optional[Support]:
        """Exact law at theta, or None if it is not enumerable."""
        return None

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "beta": self.beta}


class BernoulliLinearShift(DecisionDistribution):
    """Z = b * Zt - beta * theta with Zt ~ Bernoulli(p)."""

    def __init__(self, p: float, b: float, beta: float):
        if not 0.0 < p < 0.5:
            raise InvalidInputError(f"Bernoulli parameter must lie in (0, 1/2), got {p}")
        if not beta >= 0:
            raise InvalidInputError(f"sensitivity beta must be nonnegative, got {beta}")
        self.p = float(p)
        self.b = float(b)
        self.beta = float(beta)
        self.sample_dim = 1

    def draw(self, theta, u):
        theta = np.asarray(theta, dtype=np.float64)
        hit = (np.asarray(u) < self.p).astype(np.float64)
        return self.b * hit[..., None] - self.beta * theta

    def support(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        shifted = -self.beta * theta
        points = np.stack([shifted, self.b + shifted], axis=-2)
        return Support(points, np.array([1.0 - self.p, self.p]))

    def describe(self):
        return {"kind": "bernoulli", "p": self.p, "b": self.b, "beta": self.beta}


class IdentityShift:
    """s_i(theta) = 0."""

    beta = 0.0

    def __call__(self, records, theta):
        return records * 1.0


class LinearShift:
    """s_i(theta) = -beta * theta (sample and model dimensions must agree)."""

    def __init__(self, beta: float):
        if not beta >= 0:
            raise InvalidInputError(f"sensitivity beta must be nonnegative, got {beta}")
        self.beta = float(beta)

    def __call__(self, records, theta):
        return records - self.beta * theta


class StrategicResponse:
    """
    Best response x = x_bar - beta * y * theta of the utility
    -y <theta, x> - ||x - x_bar||^2 / (2 beta); labels are never changed.
    """

    def __init__(self, beta: float):
        if not beta >= 0:
            raise InvalidInputError(f"sensitivity beta must be nonnegative, got {beta}")
        self.beta = float(beta)

    def __call__(self, records, theta):
        x = records[..., :-1]
        y = records[..., -1:]
        moved = x - self.beta * y * theta
        return np.concatenate([moved, np.broadcast_to(y, moved.shape[:-1] + (1,))], axis=-1)


class DatabaseShift(DecisionDistribution):
    """Z = z_bar_i + s_i(theta) with i ~ Unif([m])."""

    def __init__(self, db: FiniteDatabase, shift, beta: Optional[float] = None):
        if db.m < 1:
            raise InvalidInputError("database is empty")
        self.db = db
        self.shift = shift
        self.beta = float(shift.beta if beta is None else beta)
        self.sample_dim = db.sample_dim

    def _check_dim(self, theta):
        if theta.shape[-1] != self.db.feature_dim:
            raise InvalidInputError(
                f"model dimension {theta.shape[-1]} does not match feature dimension {self.db.feature_dim}"
            )

    def draw(self, theta, u):
        theta = np.asarray(theta, dtype=np.float64)
        self._check_dim(theta)
        idx = np.minimum((np.asarray(u) * self.db.m).astype(np.int64), self.db.m - 1)
        return self.shift(self.db.records[idx], theta)

    def support(self, theta):
        if getattr(self.shift, "stochastic", False):
            return None
        theta = np.asarray(theta, dtype=np.float64)
        self._check_dim(theta)
        points = self.shift(self.db.records, theta[..., None, :])
        points = np.broadcast_to(points, theta.shape[:-1] + self.db.records.shape)
        return Support(points, np.full(self.db.m, 1.0 / self.db.m))

    def describe(self):
        return {"kind": type(self.shift).__name__, "m": self.db.m, "beta": self.beta}


def bernoulli_linear_shift(p: float, b: float, beta: float) -> BernoulliLinearShift:
    return BernoulliLinearShift(p, b, beta)


def finite_database_shift(db: FiniteDatabase, shift=None) -> DatabaseShift:
    if db is None or db.m < 1:
        raise InvalidInputError("database is empty")
    return DatabaseShift(db, shift if shift is not None else IdentityShift())


def strategic_feature_shift(db: FiniteDatabase, beta: float) -> DatabaseShift:
    if not beta >= 0:
        raise InvalidInputError(f"sensitivity beta must be nonnegative, got {beta}")
    if not db.labeled:
        raise InvalidInputError("strategic responses need a labelled database")
    return DatabaseShift(db, StrategicResponse(beta), beta)


def _require_support(dist: DecisionDistribution, theta) -> Support:
    sup = dist.support(theta)
    if sup is None:
        raise UnsupportedOperationError(
            f"{type(dist).__name__} has no enumerable support; use a Monte-Carlo estimate"
        )
    return sup


def exact_expected_clipped_grad(dist: DecisionDistribution, loss: LossModel, theta, c: float) -> np.ndarray:
    """
    E_{Z ~ D(theta)}[clip_c(grad l(theta; Z))] by enumeration of the support.

    Broadcasts over leading axes of theta; c = inf gives the unclipped expectation.

    Raises:
        UnsupportedOperationError: If the distribution has no enumerable support
    """
    theta = np.asarray(theta, dtype=np.float64)
    sup = _require_support(dist, theta)
    grads = loss.grad(theta[..., None, :], sup.points)
    clipped, _ = clip_rows(grads, c)
    return np.sum(sup.probs[..., None] * clipped, axis=-2)


def expected_grad(dist: DecisionDistribution, loss: LossModel, theta) -> np.ndarray:
    """grad f(theta; theta), the stationarity measure of the non-convex analysis."""
    return expected_grad_at(dist, loss, theta, theta)


def expected_grad_at(dist: DecisionDistribution, loss: LossModel, theta, deployed) -> np.ndarray:
    """grad f(theta; deployed) = E_{Z ~ D(deployed)}[grad l(theta; Z)]."""
    theta = np.asarray(theta, dtype=np.float64)
    sup = _require_support(dist, np.asarray(deployed, dtype=np.float64))
    grads = loss.grad(theta[..., None, :], sup.points)
    return np.sum(sup.probs[..., None] * grads, axis=-2)


def expected_loss_at(dist: DecisionDistribution, loss: LossModel, theta, deployed) -> np.ndarray:
    """f(theta; deployed) = E_{Z ~ D(deployed)}[l(theta; Z)]."""
    theta = np.asarray(theta, dtype=np.float64)
    sup = _require_support(dist, np.asarray(deployed, dtype=np.float64))
    return np.sum(sup.probs * loss.loss(theta[..., None, :], sup.points), axis=-1)


def performative_risk(dist: DecisionDistribution, loss: LossModel, theta) -> np.ndarray:
    """E_{Z ~ D(theta)}[l(theta; Z)]."""
    return expected_loss_at(dist, loss, theta, theta)


def monte_carlo_clipped_grad(
    dist: DecisionDistribution, loss: LossModel, theta, c: float, n: int, rng: np.random.Generator
):
    """
    Monte-Carlo estimate of the clipped gradient expectation at a single theta.

    Returns:
        Tuple of (mean vector, per-coordinate standard error)
    """
    theta = np.asarray(theta, dtype=np.float64)
    thetas = np.broadcast_to(theta, (n,) + theta.shape)
    samples = dist.draw(thetas, rng.random(n))
    clipped, _ = clip_rows(loss.grad(thetas, samples), c)
    return clipped.mean(axis=0), clipped.std(axis=0, ddof=1) / np.sqrt(n)


def bernoulli_database_shift(m: int, p: float, b: float, beta: float, rng: np.random.Generator) -> DatabaseShift:
    """
    Finite-database form of the Bernoulli experiment: uniform over {b z_i - beta theta}.

    The database's sample mean divided by b is the p_bar used by the database oracle.
    """
    from .datasets import make_bernoulli_database

    if not 0.0 < p < 0.5:
        raise InvalidInputError(f"Bernoulli parameter must lie in (0, 1/2), got {p}")
    db = make_bernoulli_database(m, p, b, rng)
    logger.debug(f"Drew Bernoulli database with m={m}, p_bar={db_sample_mean(db, b):.6f}")
    return DatabaseShift(db, LinearShift(beta))


def db_sample_mean(db: FiniteDatabase, b: float) -> float:
    """p_bar = mean(z_i) / b for a Bernoulli database."""
    if b == 0:
        raise InvalidInputError("b must be nonzero to recover p_bar")
    return float(np.mean(db.records[:, 0])) / b
