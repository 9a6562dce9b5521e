"""
Reference solutions: closed forms for the Bernoulli/quadratic family and
numerical solvers for performatively stable points and clipped fixed points.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import optimize

from ..core.operators import BoxRegion, clip_rows
from ..errors import IllPosedError, InvalidInputError, NonConvergenceError, PreconditionError
from ..models.distributions import (
    DecisionDistribution,
    Support,
    exact_expected_clipped_grad,
)
from ..models.losses import LossModel

logger = logging.getLogger("perfclip.analysis.oracles")


@dataclass(frozen=True)
class QuadraticInstance:
    """Loss (theta + a z)^2 / 2 with z = b Zt - beta theta, Zt ~ Bernoulli(p), clipped at c."""

    p: float
    a: float
    b: float
    beta: float
    c: float

    def __post_init__(self):
        if not 0.0 < self.p < 0.5:
            raise InvalidInputError(f"p must lie in (0, 1/2), got {self.p}")
        if not self.a > 0:
            raise InvalidInputError(f"a must be positive, got {self.a}")
        if not self.beta >= 0:
            raise InvalidInputError(f"beta must be nonnegative, got {self.beta}")
        if not self.c > 0:
            raise InvalidInputError(f"c must be positive, got {self.c}")

    @property
    def contraction(self) -> float:
        """1 - a beta."""
        return 1.0 - self.a * self.beta


@dataclass
class FixedPointResult:
    """Outcome of a numerical oracle."""

    theta: np.ndarray
    residual: float
    iterations: int
    gaps: List[float] = field(default_factory=list)


def _well_posed(inst: QuadraticInstance) -> None:
    if inst.contraction <= 0.0:
        raise IllPosedError(f"a*beta = {inst.a * inst.beta:g} >= 1: no performatively stable point")


def theta_ps_quadratic(inst: QuadraticInstance, p_bar: Optional[float] = None) -> float:
    """
    theta_PS = -p a b / (1 - a beta).

    Args:
        inst: Quadratic instance
        p_bar: Sample frequency to use instead of p (finite-database variant)

    Raises:
        IllPosedError: If a beta >= 1
    """
    _well_posed(inst)
    p = inst.p if p_bar is None else p_bar
    return -p * inst.a * inst.b / inst.contraction


def theta_inf_quadratic(inst: QuadraticInstance) -> float:
    """
    Fixed point of clipped SGD: theta_inf = -p c / ((1 - p)(1 - a beta)).

    At this point the gradient of the z = 0 branch has norm below c and the
    z = b branch is clipped, which requires a b >= 2c.

    Raises:
        PreconditionError: If a b < 2c
        IllPosedError: If a beta >= 1
    """
    _well_posed(inst)
    if inst.a * inst.b < 2.0 * inst.c:
        raise PreconditionError("closed-form clipped fixed point", [f"a*b={inst.a * inst.b:g} < 2c={2 * inst.c:g}"])
    return -inst.p * inst.c / ((1.0 - inst.p) * inst.contraction)


def quadratic_bias(inst: QuadraticInstance) -> float:
    """
    p^2 / (1 - a beta)^2 * (a b - c / (1 - p))^2.

    Equals (theta_inf - theta_PS)^2 whenever a b >= 2c; the formula itself
    only needs a beta < 1.
    """
    _well_posed(inst)
    inner = inst.a * inst.b - inst.c / (1.0 - inst.p)
    return inst.p ** 2 / inst.contraction ** 2 * inner ** 2


def quadratic_gradient_bound(inst: QuadraticInstance, region: BoxRegion) -> float:
    """G = max over box corners and Zt in {0, 1} of |(1 - a beta) theta + a b Zt|."""
    corners = region.corners()[:, 0]
    values = inst.contraction * corners[:, None] + inst.a * inst.b * np.array([0.0, 1.0])
    return float(np.max(np.abs(values)))


def _law(dist: DecisionDistribution, theta: np.ndarray, mc_samples: int, u: Optional[np.ndarray]) -> Support:
    """Exact support at theta, or a sample-average law on fixed uniforms."""
    sup = dist.support(theta)
    if sup is not None:
        return sup
    if u is None:
        raise InvalidInputError("a Monte-Carlo law needs an rng")
    points = dist.draw(np.broadcast_to(theta, (mc_samples,) + theta.shape), u)
    return Support(points, np.full(mc_samples, 1.0 / mc_samples))


def _mean_grad(loss: LossModel, theta: np.ndarray, law: Support) -> np.ndarray:
    return np.sum(law.probs[:, None] * loss.grad(theta, law.points), axis=0)


def _minimize_static(loss: LossModel, law: Support, start: np.ndarray, tol: float, max_inner: int) -> np.ndarray:
    """argmin_theta E_law[l(theta; Z)] to gradient norm <= tol."""

    def fun(theta):
        value = float(np.sum(law.probs * loss.loss(theta, law.points)))
        return value, _mean_grad(loss, theta, law)

    res = optimize.minimize(
        fun, start, jac=True, method="L-BFGS-B",
        options={"maxiter": max_inner, "ftol": 0.0, "gtol": tol / 10.0},
    )
    theta = np.asarray(res.x, dtype=np.float64)

    # finish with plain gradient steps at step 1/L
    step = 1.0 / loss.hessian_bound(law.points)
    for _ in range(max_inner):
        g = _mean_grad(loss, theta, law)
        if np.linalg.norm(g) <= tol:
            return theta
        theta = theta - step * g
    raise NonConvergenceError("inner minimisation stalled", float(np.linalg.norm(g)), max_inner)


def solve_ps_rrm(
    loss: LossModel,
    dist: DecisionDistribution,
    theta0=None,
    tol: float = 1e-8,
    max_outer: int = 200,
    max_inner: int = 10000,
    mc_samples: int = 100000,
    rng: Optional[np.random.Generator] = None,
) -> FixedPointResult:
    """
    Performatively stable point by repeated risk minimisation.

    theta_{k+1} = argmin_theta E_{Z ~ D(theta_k)}[l(theta; Z)], stopping when
    ||theta_{k+1} - theta_k|| <= tol. Expectations are exact when the
    distribution has enumerable support and sample averages over mc_samples
    fixed uniforms otherwise.

    Raises:
        NonConvergenceError: If max_outer iterations pass without the gap reaching tol
    """
    if loss.mu <= 0:
        raise InvalidInputError("repeated risk minimisation needs a strongly convex loss")
    theta_bar = np.zeros(loss.dim) if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    u = rng.random(mc_samples) if rng is not None else None

    gaps: List[float] = []
    for k in range(1, max_outer + 1):
        law = _law(dist, theta_bar, mc_samples, u)
        theta = _minimize_static(loss, law, theta_bar, tol / 10.0, max_inner)
        gap = float(np.linalg.norm(theta - theta_bar))
        gaps.append(gap)
        theta_bar = theta
        if gap <= tol:
            break
    else:
        raise NonConvergenceError("repeated risk minimisation did not settle", gaps[-1], max_outer)

    residual = float(np.linalg.norm(_mean_grad(loss, theta_bar, _law(dist, theta_bar, mc_samples, u))))
    logger.info(f"RRM converged in {len(gaps)} outer iterations (residual {residual:.3e})")
    return FixedPointResult(theta_bar, residual, len(gaps), gaps)


def solve_ps_root(
    loss: LossModel,
    dist: DecisionDistribution,
    theta0=None,
    tol: float = 1e-10,
) -> FixedPointResult:
    """
    Performatively stable point as a root of theta -> E_{Z ~ D(theta)}[grad l(theta; Z)].

    Used when repeated risk minimisation does not contract. Needs enumerable support.
    """
    start = np.zeros(loss.dim) if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=np.float64))

    def h(theta):
        return exact_expected_clipped_grad(dist, loss, theta, np.inf)

    res = optimize.root(h, start, method="hybr", tol=tol)
    theta = np.asarray(res.x, dtype=np.float64)
    residual = float(np.linalg.norm(h(theta)))
    if not res.success or residual > max(tol, 1e-8):
        raise NonConvergenceError(f"root finding failed ({res.message})", residual, int(res.nfev))
    return FixedPointResult(theta, residual, int(res.nfev))


def solve_clipped_fixed_point(
    loss: LossModel,
    dist: DecisionDistribution,
    c: float,
    tol: float = 1e-10,
    theta0=None,
    max_iter: int = 100000,
    mc_samples: int = 100000,
    rng: Optional[np.random.Generator] = None,
) -> FixedPointResult:
    """
    Point where E_{Z ~ D(theta)}[clip_c(grad l(theta; Z))] = 0.

    One-dimensional problems with enumerable support are bracketed and bisected
    (the clipped mean field is increasing in theta); otherwise damped iteration
    theta <- theta - h(theta) / (2L) runs until ||h|| <= tol.

    Raises:
        NonConvergenceError: If no bracket is found or the iteration stalls
    """
    start = np.zeros(loss.dim) if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    if loss.dim == 1 and dist.support(start) is not None:
        return _bisect_fixed_point(loss, dist, c, tol, float(start[0]))

    u = rng.random(mc_samples) if rng is not None else None

    def h(theta):
        law = _law(dist, theta, mc_samples, u)
        clipped, _ = clip_rows(loss.grad(theta, law.points), c)
        return np.sum(law.probs[:, None] * clipped, axis=0)

    L = loss.lipschitz if loss.lipschitz else loss.hessian_bound(_law(dist, start, mc_samples, u).points)
    eta = 1.0 / (2.0 * L)
    theta = start.copy()
    for it in range(1, max_iter + 1):
        value = h(theta)
        residual = float(np.linalg.norm(value))
        if residual <= tol:
            return FixedPointResult(theta, residual, it)
        theta = theta - eta * value
    raise NonConvergenceError("damped fixed-point iteration stalled", residual, max_iter)


def _bisect_fixed_point(loss, dist, c, tol, start) -> FixedPointResult:
    def h(x: float) -> float:
        return float(exact_expected_clipped_grad(dist, loss, np.array([x]), c)[0])

    lo, hi, width = start - 1.0, start + 1.0, 1.0
    for _ in range(80):
        h_lo, h_hi = h(lo), h(hi)
        if h_lo == 0.0:
            return FixedPointResult(np.array([lo]), 0.0, 0)
        if h_hi == 0.0:
            return FixedPointResult(np.array([hi]), 0.0, 0)
        if h_lo < 0.0 < h_hi:
            break
        width *= 2.0
        lo, hi = start - width, start + width
    else:
        raise NonConvergenceError("could not bracket the clipped fixed point", min(abs(h_lo), abs(h_hi)), 80)

    root, info = optimize.bisect(h, lo, hi, xtol=1e-15, maxiter=400, full_output=True, disp=False)
    residual = abs(h(root))
    if not info.converged or residual > tol:
        raise NonConvergenceError("bisection did not reach the tolerance", residual, info.iterations)
    return FixedPointResult(np.array([root]), residual, info.iterations)
