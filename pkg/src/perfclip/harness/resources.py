"""
Experiment resources.

Builds the loss, distribution, schedules and oracle points an experiment
needs from its configuration, and measures the constants the bounds use.
"""
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..algorithms.optimizers import OptimizerConfig
from ..algorithms.trajectory import TrajectoryRecorder
from ..analysis.oracles import (
    QuadraticInstance,
    solve_clipped_fixed_point,
    solve_ps_root,
    solve_ps_rrm,
    theta_inf_quadratic,
    theta_ps_quadratic,
)
from ..analysis.privacy import PrivacyBudget, dp_sigma, naive_step_size
from ..core.operators import UNBOUNDED, BoxRegion
from ..core.schedules import ConstantSchedule, PolynomialSchedule, StepSchedule, TheoreticalOptimalSchedule
from ..errors import ConfigError, PerfclipError
from ..models.datasets import FiniteDatabase, load_database_csv, make_credit_like_dataset, train_test_split
from ..models.distributions import (
    DatabaseShift,
    DecisionDistribution,
    LinearShift,
    Support,
    bernoulli_database_shift,
    bernoulli_linear_shift,
    db_sample_mean,
    finite_database_shift,
    strategic_feature_shift,
)
from ..models.losses import LossModel, bounded_nonconvex_loss, quadratic_scalar_loss, regularized_logistic_loss
from .schema import ExperimentConfig

logger = logging.getLogger("perfclip.harness.resources")

# spawn key of the data stream; trial streams use (trial,)
DATA_STREAM_KEY = (2 ** 32, 0)
MEASURE_SAMPLES = 2000


def data_generator(seed: int) -> np.random.Generator:
    """Generator for dataset synthesis, disjoint from every trial stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=DATA_STREAM_KEY)))


@dataclass
class MeasuredConstants:
    """Problem constants, declared or measured on the configured box."""

    mu: float
    L: float
    mu_tilde: float
    G: float
    sigma0: float
    sigma1: float
    loss_max: float
    G_measured: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class OracleValues:
    """Reference points resolved before any trial runs."""

    kind: str
    theta_ps: Optional[np.ndarray] = None
    theta_inf: Optional[np.ndarray] = None
    p_bar: Optional[float] = None
    residual: Optional[float] = None

    @property
    def bias(self) -> Optional[float]:
        if self.theta_ps is None or self.theta_inf is None:
            return None
        return float(np.sum((self.theta_inf - self.theta_ps) ** 2))

    def as_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "theta_ps": None if self.theta_ps is None else self.theta_ps.tolist(),
            "theta_inf": None if self.theta_inf is None else self.theta_inf.tolist(),
            "bias": self.bias,
            "p_bar": self.p_bar,
            "residual": self.residual,
        }


def _law(dist: DecisionDistribution, theta: np.ndarray, rng: np.random.Generator, n: int) -> Support:
    sup = dist.support(theta)
    if sup is not None:
        return sup
    points = dist.draw(np.broadcast_to(theta, (n,) + theta.shape), rng.random(n))
    return Support(points, np.full(n, 1.0 / n))


def candidate_points(region: BoxRegion, rng: Optional[np.random.Generator] = None, n_random: int = 256) -> np.ndarray:
    """
    Points of a box at which constants are measured.

    Corners and centre, plus an 11-point grid per axis in dimension <= 3. Above
    ten dimensions the corners are replaced by n_random uniform points.
    """
    dim = region.dim
    center = 0.5 * (region.lower + region.upper)
    if dim <= 10:
        points = [region.corners(), center[None, :]]
    else:
        rng = rng if rng is not None else data_generator(0)
        points = [center[None, :], region.lower + (region.upper - region.lower) * rng.random((n_random, dim))]
    if dim <= 3:
        axes = [np.linspace(lo, hi, 11) for lo, hi in zip(region.lower, region.upper)]
        points.append(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim))
    return np.unique(np.concatenate(points), axis=0)


def measure_gradient_bound(
    loss: LossModel,
    dist: DecisionDistribution,
    region: BoxRegion,
    rng: Optional[np.random.Generator] = None,
    mc_samples: int = MEASURE_SAMPLES,
) -> float:
    """
    max ||grad l(theta; z)|| over theta in the box and z in the support of D(theta).

    Exact on the corners for losses whose gradient is affine in theta; a
    Monte-Carlo lower estimate when the support is not enumerable.
    """
    rng = rng if rng is not None else data_generator(0)
    worst = 0.0
    for theta in candidate_points(region, rng):
        law = _law(dist, theta, rng, mc_samples)
        norms = np.linalg.norm(loss.grad(theta, law.points), axis=-1)
        worst = max(worst, float(np.max(norms)))
    logger.debug(f"Measured gradient bound G={worst:.6g} on {region}")
    return worst


def measure_variance_constants(
    loss: LossModel,
    dist: DecisionDistribution,
    region: BoxRegion,
    rng: Optional[np.random.Generator] = None,
    mc_samples: int = MEASURE_SAMPLES,
) -> Tuple[float, float]:
    """
    (sigma0, sigma1) with E||grad l - grad f||^2 <= sigma0^2 + sigma1^2 ||grad f||^2.

    sigma1 is fixed at 0 and sigma0^2 is the largest variance over the candidate points.
    """
    rng = rng if rng is not None else data_generator(0)
    worst = 0.0
    for theta in candidate_points(region, rng):
        law = _law(dist, theta, rng, mc_samples)
        grads = loss.grad(theta, law.points)
        mean = np.sum(law.probs[:, None] * grads, axis=0)
        worst = max(worst, float(np.sum(law.probs * np.sum((grads - mean) ** 2, axis=-1))))
    return math.sqrt(worst), 0.0


def measure_loss_bound(
    loss: LossModel,
    dist: DecisionDistribution,
    region: BoxRegion,
    rng: Optional[np.random.Generator] = None,
    mc_samples: int = MEASURE_SAMPLES,
) -> float:
    """max |l(theta; z)| over the candidate points and their supports."""
    rng = rng if rng is not None else data_generator(0)
    worst = 0.0
    for theta in candidate_points(region, rng):
        law = _law(dist, theta, rng, mc_samples)
        worst = max(worst, float(np.max(np.abs(loss.loss(theta, law.points)))))
    return worst


class ExperimentResources:
    """
    Manages the objects an experiment is built from.

    Everything is constructed lazily and cached, so commands that only need
    the oracle or the privacy calibration never synthesise trial data twice.
    """

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the resources of one experiment.

        Args:
            config: Validated experiment configuration
        """
        self.config = config
        self._loss: Optional[LossModel] = None
        self._dist: Optional[DecisionDistribution] = None
        self._train_db: Optional[FiniteDatabase] = None
        self._test_db: Optional[FiniteDatabase] = None
        self._constants: Optional[MeasuredConstants] = None
        self._oracle: Optional[OracleValues] = None
        self._sigma_dp: Optional[float] = None

    # Problem

    @property
    def data_seed(self) -> int:
        seed = self.config.distribution.data_seed
        return self.config.experiment.seed if seed is None else seed

    @property
    def dim(self) -> int:
        return self.config.loss.dim

    @property
    def loss(self) -> LossModel:
        if self._loss is None:
            self._build_problem()
        return self._loss

    @property
    def distribution(self) -> DecisionDistribution:
        if self._dist is None:
            self._build_problem()
        return self._dist

    @property
    def test_db(self) -> Optional[FiniteDatabase]:
        if self._dist is None:
            self._build_problem()
        return self._test_db

    def _load_labeled(self, rng: np.random.Generator) -> FiniteDatabase:
        cfg = self.config.distribution
        if cfg.csv:
            db = load_database_csv(cfg.csv, labeled=True)
            logger.info(f"Loaded {db.m} records from {cfg.csv}")
        else:
            db = make_credit_like_dataset(cfg.m, self.dim, rng, cfg.positive_fraction, cfg.separation)
            logger.info(f"Synthesised {db.m} records (d={self.dim}, positives={db.positive_fraction():.4f})")
        if db.feature_dim != self.dim:
            raise ConfigError(
                f"loss.dim={self.dim} does not match the {db.feature_dim} features of the database", "loss.dim"
            )
        return db

    def _build_problem(self) -> None:
        loss_cfg, dist_cfg = self.config.loss, self.config.distribution
        rng = data_generator(self.data_seed)

        if dist_cfg.kind == "bernoulli":
            if self.dim != 1:
                raise ConfigError("the Bernoulli distribution is scalar; set loss.dim = 1", "loss.dim")
            dist = bernoulli_linear_shift(dist_cfg.p, dist_cfg.b, dist_cfg.beta)
        elif dist_cfg.kind == "bernoulli-database":
            if self.dim != 1:
                raise ConfigError("the Bernoulli database is scalar; set loss.dim = 1", "loss.dim")
            dist = bernoulli_database_shift(dist_cfg.m, dist_cfg.p, dist_cfg.b, dist_cfg.beta, rng)
            self._train_db = dist.db
        elif dist_cfg.kind == "strategic":
            db = self._load_labeled(rng)
            self._train_db, self._test_db = train_test_split(db, dist_cfg.train_fraction, rng)
            dist = strategic_feature_shift(self._train_db, dist_cfg.beta)
        else:
            if not dist_cfg.csv:
                raise ConfigError("distribution.kind = 'database' needs distribution.csv", "distribution.csv")
            labeled = loss_cfg.kind == "logistic"
            self._train_db = load_database_csv(dist_cfg.csv, labeled=labeled)
            if labeled:
                dist = strategic_feature_shift(self._train_db, dist_cfg.beta)
            else:
                dist = finite_database_shift(self._train_db, LinearShift(dist_cfg.beta))

        if loss_cfg.kind == "quadratic":
            if self.dim != 1:
                raise ConfigError("the quadratic loss is scalar; set loss.dim = 1", "loss.dim")
            loss = quadratic_scalar_loss(loss_cfg.a)
        elif loss_cfg.kind == "logistic":
            if self._train_db is None or not self._train_db.labeled:
                raise ConfigError("the logistic loss needs labelled data (distribution.kind = 'strategic')", "loss.kind")
            eta = loss_cfg.eta if loss_cfg.eta is not None else 100.0 / self._train_db.m
            loss = regularized_logistic_loss(eta, self.dim)
        else:
            loss = bounded_nonconvex_loss(self.dim)

        self._loss, self._dist = loss, dist
        logger.info(f"Built {loss!r} under {type(dist).__name__} {dist.describe()}")

    @property
    def database_size(self) -> int:
        """Number of records the private data set holds."""
        if self._dist is None:
            self._build_problem()
        return self._train_db.m if self._train_db is not None else self.config.distribution.m

    @property
    def region(self):
        """Projection region of SGD/PCSGD."""
        if self.config.optimizer.unbounded:
            return UNBOUNDED
        return self.measurement_box

    @property
    def measurement_box(self) -> BoxRegion:
        """Box on which G, sigma0 and l_max are measured (the projection box even when unbounded)."""
        opt = self.config.optimizer
        return BoxRegion.cube(opt.region_low, opt.region_high, self.dim)

    @property
    def theta0(self) -> np.ndarray:
        value = self.config.optimizer.theta0
        if isinstance(value, list):
            if len(value) != self.dim:
                raise ConfigError(f"optimizer.theta0 has {len(value)} entries, expected {self.dim}", "optimizer.theta0")
            return np.asarray(value, dtype=np.float64)
        return np.full(self.dim, float(value))

    # Constants

    def check_stability(self) -> bool:
        """
        Check that the distribution shift is weak enough for a unique stable point.

        Returns:
            True if beta < mu / L
        """
        ok = self.constants.mu_tilde > 0
        if not ok:
            logger.warning(
                f"beta={self.config.distribution.beta:g} >= mu/L={self.constants.mu / self.constants.L:g}: "
                "strongly convex guarantees do not apply"
            )
        return ok

    @property
    def constants(self) -> MeasuredConstants:
        if self._constants is None:
            loss, dist = self.loss, self.distribution
            box = self.measurement_box
            rng = data_generator(self.data_seed + 1)
            if loss.lipschitz is not None:
                L = float(loss.lipschitz)
            else:
                L = float(loss.hessian_bound(self._train_db.records))
            mu = float(loss.mu)
            G_measured = measure_gradient_bound(loss, dist, box, rng)
            G = self.config.bounds.G if self.config.bounds.G is not None else G_measured
            sigma0, sigma1 = measure_variance_constants(loss, dist, box, rng)
            loss_max = float(loss.loss_bound) if loss.loss_bound is not None else measure_loss_bound(loss, dist, box, rng)
            self._constants = MeasuredConstants(
                mu=mu,
                L=L,
                mu_tilde=mu - L * self.config.distribution.beta,
                G=G,
                sigma0=sigma0,
                sigma1=sigma1,
                loss_max=loss_max,
                G_measured=G_measured,
            )
            logger.info(
                f"Constants: mu={mu:g} L={L:g} mu_tilde={self._constants.mu_tilde:g} "
                f"G={G:g} sigma0={sigma0:.6g} l_max={loss_max:.6g}"
            )
        return self._constants

    # Oracle

    @property
    def oracle(self) -> OracleValues:
        if self._oracle is None:
            kind = self.config.oracle.kind
            try:
                self._oracle = self._resolve_oracle(kind)
            except ConfigError:
                raise
            except PerfclipError as e:
                raise ConfigError(f"oracle '{kind}' failed: {e}", "oracle.kind") from e
            if self._oracle.theta_ps is not None:
                logger.info(f"theta_PS = {self._oracle.theta_ps.tolist()}")
            if self._oracle.theta_inf is not None:
                logger.info(f"theta_inf = {self._oracle.theta_inf.tolist()} (bias {self._oracle.bias:.6g})")
        return self._oracle

    def quadratic_instance(self) -> QuadraticInstance:
        """Closed-form instance for the quadratic Bernoulli experiment."""
        cfg = self.config
        if cfg.loss.kind != "quadratic" or cfg.distribution.kind not in ("bernoulli", "bernoulli-database"):
            raise ConfigError(
                "the closed-form oracle needs loss.kind = 'quadratic' with a Bernoulli distribution", "oracle.kind"
            )
        return QuadraticInstance(
            cfg.distribution.p, cfg.loss.a, cfg.distribution.b, cfg.distribution.beta, cfg.optimizer.c
        )

    def _resolve_oracle(self, kind: str) -> OracleValues:
        ocfg, c = self.config.oracle, self.config.optimizer.c
        loss, dist = self.loss, self.distribution
        want_inf = ocfg.target == "inf"

        if kind == "none":
            return OracleValues(kind)

        if kind == "closed-form":
            inst = self.quadratic_instance()
            p_bar = None
            if isinstance(dist, DatabaseShift):
                p_bar = db_sample_mean(dist.db, self.config.distribution.b)
                inst = replace(inst, p=p_bar)
            theta_ps = np.array([theta_ps_quadratic(inst)])
            if inst.a * inst.b >= 2.0 * inst.c:
                theta_inf = np.array([theta_inf_quadratic(inst)])
            else:
                theta_inf = solve_clipped_fixed_point(loss, dist, c, theta0=theta_ps).theta
            return OracleValues(kind, theta_ps, theta_inf, p_bar=p_bar, residual=0.0)

        rng = data_generator(self.data_seed + 2)
        if kind == "rrm":
            result = solve_ps_rrm(
                loss, dist, tol=ocfg.tol, max_outer=ocfg.max_outer, mc_samples=ocfg.mc_samples, rng=rng
            )
        else:
            result = solve_ps_root(loss, dist, tol=min(ocfg.tol, 1e-10))
        theta_inf = None
        if want_inf:
            theta_inf = solve_clipped_fixed_point(
                loss, dist, c, tol=max(ocfg.tol, 1e-10), theta0=result.theta, mc_samples=ocfg.mc_samples, rng=rng
            ).theta
        return OracleValues(kind, result.theta, theta_inf, residual=result.residual)

    def reference_point(self) -> Optional[np.ndarray]:
        """Point the distance series is measured against."""
        oracle = self.oracle
        point = oracle.theta_inf if self.config.oracle.target == "inf" else oracle.theta_ps
        if point is None and self.config.experiment.metric in ("distance_sq", "shadow_distance_sq"):
            raise ConfigError(
                f"metric '{self.config.experiment.metric}' needs an oracle point; set oracle.kind", "oracle.kind"
            )
        return point

    def initial_gap_sq(self) -> float:
        theta_ps = self.oracle.theta_ps
        if theta_ps is None:
            raise ConfigError("this step size needs theta_PS; set oracle.kind", "oracle.kind")
        return float(np.sum((self.theta0 - theta_ps) ** 2))

    # Privacy and step sizes

    def budget(self) -> Optional[PrivacyBudget]:
        """Privacy budget of the run, or None when calibration is off."""
        pcfg = self.config.privacy
        if pcfg.epsilon is None:
            return None
        m = pcfg.m if pcfg.m is not None else self.database_size
        delta = pcfg.delta if pcfg.delta is not None else 1.0 / m
        return PrivacyBudget(pcfg.epsilon, delta, m, self.config.experiment.T, self.dim)

    @property
    def sigma_dp(self) -> float:
        if self._sigma_dp is None:
            if self.config.privacy.calibrate:
                budget = self.budget()
                self._sigma_dp = dp_sigma(self.config.optimizer.c, budget, strict=self.config.privacy.strict)
                logger.info(f"Calibrated sigma_DP={self._sigma_dp:.6g} for epsilon={budget.epsilon:g}, m={budget.m}")
            else:
                self._sigma_dp = self.config.optimizer.sigma_dp
        return self._sigma_dp

    def optimal_schedule(self) -> TheoreticalOptimalSchedule:
        k = self.constants
        return TheoreticalOptimalSchedule(
            k.mu_tilde, self.config.experiment.T, self.config.optimizer.c, k.G, self.dim,
            self.sigma_dp, self.initial_gap_sq(),
        )

    def naive_schedule(self) -> ConstantSchedule:
        k = self.constants
        gamma = naive_step_size(
            k.mu, self.config.experiment.T, self.config.optimizer.c, k.G, self.dim,
            self.sigma_dp, self.initial_gap_sq(),
        )
        return ConstantSchedule(gamma)

    def schedule(self) -> StepSchedule:
        opt = self.config.optimizer
        if opt.schedule == "constant":
            return ConstantSchedule(opt.gamma)
        if opt.schedule == "polynomial":
            return PolynomialSchedule(opt.a0, opt.a1)
        if opt.schedule == "optimal":
            return self.optimal_schedule()
        return self.naive_schedule()

    def optimizer_config(self, algorithm: str, schedule: Optional[StepSchedule] = None) -> OptimizerConfig:
        """Hyperparameters for one algorithm; DiceSGD always runs unprojected."""
        opt = self.config.optimizer
        return OptimizerConfig(
            schedule=schedule if schedule is not None else self.schedule(),
            clip_c=math.inf if algorithm == "sgd" else opt.c,
            clip_c1=opt.c1,
            clip_c2=opt.c2,
            sigma_dp=self.sigma_dp,
            region=UNBOUNDED if algorithm == "dicesgd" else self.region,
            dp_multiplier=opt.dp_multiplier,
        )

    def metric(self, algorithm: str) -> str:
        """Series reported as the mean column."""
        metric = self.config.experiment.metric
        if metric != "auto":
            return metric
        return "distance_sq" if self.reference_point() is not None else "grad_norm_sq"

    def recorder(self) -> TrajectoryRecorder:
        return TrajectoryRecorder(
            self.loss,
            self.distribution,
            theta_ref=self.reference_point(),
            test_db=self.test_db,
            thinning=self.config.experiment.thinning,
        )

    def metadata(self) -> Dict[str, Any]:
        """Resolved problem description for the run metadata."""
        out: Dict[str, Any] = {
            "loss": repr(self.loss),
            "loss_constants": self.loss.constants(),
            "distribution": self.distribution.describe(),
            "constants": self.constants.as_dict(),
            "oracle": self.oracle.as_dict(),
            "sigma_dp": self.sigma_dp,
        }
        budget = self.budget()
        if budget is not None:
            out["privacy"] = {**asdict(budget), "epsilon_limit": budget.epsilon_limit}
        return out
