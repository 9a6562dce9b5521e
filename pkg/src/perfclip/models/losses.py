"""
Loss models l(theta; z) with analytic gradients and declared constants.

Samples are float row vectors. Labelled samples (x, y) store the label in the
last entry, matching the CSV layout of a FiniteDatabase. Every evaluator
broadcasts over leading axes: theta of shape (..., d) against samples of
shape (..., k) gives losses of shape (...) and gradients of shape (..., d).
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy.special import expit

from ..errors import InvalidInputError

logger = logging.getLogger("perfclip.models.losses")


class LossModel:
    """
    Base class for per-sample losses.

    Attributes:
        dim: Model dimension d
        sample_dim: Length of a sample row vector
        mu: Strong convexity modulus in theta (0 if not strongly convex)
        lipschitz: Joint Lipschitz constant L of the gradient map, if known
        grad_bound: Uniform gradient bound G, if it exists independently of the region
        loss_bound: Uniform bound l_max on |l|, if it exists
        loss_floor: Lower bound l* on the loss
        sigma0, sigma1: Declared variance constants, if known
    """

    name = "loss"
    dim: int = 1
    sample_dim: int = 1
    mu: float = 0.0
    lipschitz: Optional[float] = None
    grad_bound: Optional[float] = None
    loss_bound: Optional[float] = None
    loss_floor: float = 0.0
    sigma0: Optional[float] = None
    sigma1: Optional[float] = None

    def loss(self, theta, z) -> np.ndarray:
        raise NotImplementedError

    def grad(self, theta, z) -> np.ndarray:
        raise NotImplementedError

    def hessian_bound(self, samples: np.ndarray) -> float:
        """Upper bound on the theta-Hessian norm of l(.; z) over the given samples."""
        raise NotImplementedError

    def constants(self) -> dict:
        """Declared constants, for run metadata."""
        return {
            "mu": self.mu,
            "lipschitz": self.lipschitz,
            "grad_bound": self.grad_bound,
            "loss_bound": self.loss_bound,
            "loss_floor": self.loss_floor,
            "sigma0": self.sigma0,
            "sigma1": self.sigma1,
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class QuadraticScalarLoss(LossModel):
    """l(theta; z) = (theta + a z)^2 / 2 on scalar theta and z."""

    name = "quadratic"

    def __init__(self, a: float):
        if not a > 0:
            raise InvalidInputError(f"quadratic loss needs a > 0, got {a}")
        self.a = float(a)
        self.dim = 1
        self.sample_dim = 1
        self.mu = 1.0
        self.theta_lipschitz = 1.0
        self.cross_lipschitz = self.a
        # joint Lipschitz constant over (theta, z)
        self.lipschitz = max(1.0, self.a)
        self.loss_floor = 0.0

    def loss(self, theta, z):
        r = np.asarray(theta) + self.a * np.asarray(z)
        return 0.5 * np.sum(r * r, axis=-1)

    def grad(self, theta, z):
        return np.asarray(theta) + self.a * np.asarray(z)

    def hessian_bound(self, samples):
        return 1.0

    def constants(self):
        out = super().constants()
        out.update(theta_lipschitz=self.theta_lipschitz, cross_lipschitz=self.cross_lipschitz, a=self.a)
        return out

    def __repr__(self):
        return f"QuadraticScalarLoss(a={self.a})"


class RegularizedLogisticLoss(LossModel):
    """
    Label-weighted logistic loss with ridge penalty.

    l(theta; (x, y)) = (y + 1) (log(1 + exp(x'theta)) - y x'theta) + (eta/2) ||theta||^2
    """

    name = "logistic"

    def __init__(self, eta: float, dim: int, feature_bound: Optional[float] = None):
        if not eta > 0:
            raise InvalidInputError(f"regularisation eta must be positive, got {eta}")
        if dim < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {dim}")
        self.eta = float(eta)
        self.dim = int(dim)
        self.sample_dim = self.dim + 1
        self.mu = self.eta
        self.loss_floor = 0.0
        self.feature_bound = feature_bound
        if feature_bound is not None:
            self.lipschitz = 0.5 * feature_bound ** 2 + self.eta

    @staticmethod
    def split(z):
        z = np.asarray(z, dtype=np.float64)
        return z[..., :-1], z[..., -1]

    def loss(self, theta, z):
        theta = np.asarray(theta, dtype=np.float64)
        x, y = self.split(z)
        s = np.sum(x * theta, axis=-1)
        data = (y + 1.0) * (np.logaddexp(0.0, s) - y * s)
        return data + 0.5 * self.eta * np.sum(theta * theta, axis=-1)

    def grad(self, theta, z):
        theta = np.asarray(theta, dtype=np.float64)
        x, y = self.split(z)
        s = np.sum(x * theta, axis=-1)
        weight = (y + 1.0) * (expit(s) - y)
        return weight[..., None] * x + self.eta * theta

    def hessian_bound(self, samples):
        x, _ = self.split(samples)
        # label weight <= 2, sigmoid' <= 1/4
        return 0.5 * float(np.max(np.sum(x * x, axis=-1))) + self.eta

    def constants(self):
        out = super().constants()
        out.update(eta=self.eta, feature_bound=self.feature_bound)
        return out

    def __repr__(self):
        return f"RegularizedLogisticLoss(eta={self.eta}, dim={self.dim})"


class BoundedNonconvexLoss(LossModel):
    """l(theta; z) = 1 - exp(-||theta - z||^2 / 2): smooth, bounded in [0, 1), non-convex."""

    name = "nonconvex"

    def __init__(self, dim: int = 1):
        self.dim = int(dim)
        self.sample_dim = self.dim
        self.mu = 0.0
        self.lipschitz = 1.0
        # sup of r exp(-r^2/2) is attained at r = 1
        self.grad_bound = math.exp(-0.5)
        self.loss_bound = 1.0
        self.loss_floor = 0.0
        # variance never exceeds the second moment G^2
        self.sigma0 = self.grad_bound
        self.sigma1 = 0.0

    def loss(self, theta, z):
        r = np.asarray(theta) - np.asarray(z)
        return 1.0 - np.exp(-0.5 * np.sum(r * r, axis=-1))

    def grad(self, theta, z):
        r = np.asarray(theta) - np.asarray(z)
        return r * np.exp(-0.5 * np.sum(r * r, axis=-1, keepdims=True))

    def hessian_bound(self, samples):
        return 1.0


def quadratic_scalar_loss(a: float) -> QuadraticScalarLoss:
    return QuadraticScalarLoss(a)


def regularized_logistic_loss(eta: float, d: int, feature_bound: Optional[float] = None) -> RegularizedLogisticLoss:
    return RegularizedLogisticLoss(eta, d, feature_bound)


def bounded_nonconvex_loss(dim: int = 1) -> BoundedNonconvexLoss:
    return BoundedNonconvexLoss(dim)


def grad_check_fd(model: LossModel, theta, z, h: float = 1e-6) -> float:
    """
    Compare the analytic gradient with central differences.

    Returns:
        max_i |(l(theta + h e_i) - l(theta - h e_i)) / 2h - grad_i| / (1 + |grad_i|)
    """
    if not h > 0:
        raise InvalidInputError(f"finite-difference step must be positive, got {h}")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    g = model.grad(theta, z)
    worst = 0.0
    for i in range(theta.shape[-1]):
        step = np.zeros_like(theta)
        step[i] = h
        fd = (float(model.loss(theta + step, z)) - float(model.loss(theta - step, z))) / (2.0 * h)
        worst = max(worst, abs(fd - g[i]) / (1.0 + abs(g[i])))
    return worst
