"""
Monte-Carlo trial runner.

Trials are split into fixed-size chunks. Each chunk advances its trials in
lockstep on per-trial random streams, so the results do not depend on the
number of worker processes the chunks are spread over.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..algorithms.optimizers import OptimizerConfig
from ..algorithms.streams import TrialStreams
from ..algorithms.trajectory import TrajectoryRecorder, TrialResult, run_batch
from ..analysis.bounds import DiceBoundParams, ScvxBoundParams, thm1_curve, thm4_curve
from ..config import Settings
from ..core.schedules import StepSchedule
from ..errors import FitError, PreconditionError
from ..models.distributions import DecisionDistribution
from ..models.losses import LossModel
from .metrics import AggregateMetrics, aggregate, empirical_error_bound, fit_decay_exponent
from .resources import ExperimentResources
from .schema import ExperimentConfig

logger = logging.getLogger("perfclip.harness.runner")


@dataclass
class ChunkJob:
    """Everything a worker needs to run one chunk of trials."""

    algorithm: str
    optimizer: OptimizerConfig
    loss: LossModel
    dist: DecisionDistribution
    recorder: TrajectoryRecorder
    theta0: np.ndarray
    T: int
    seed: int
    trials: List[int]
    block: int


def run_chunk(job: ChunkJob) -> List[TrialResult]:
    """Run one chunk of trials on their own streams."""
    noise_dim = job.loss.dim if job.optimizer.noisy else 0
    streams = TrialStreams(job.seed, job.trials, job.block, noise_dim)
    return run_batch(
        job.algorithm, job.optimizer, job.loss, job.dist, job.T, streams, job.recorder, job.theta0, job.trials
    )


def chunk_trials(n_trials: int, chunk_size: int) -> List[List[int]]:
    """Split trial indices 0..n-1 into consecutive chunks of chunk_size."""
    return [list(range(start, min(start + chunk_size, n_trials))) for start in range(0, n_trials, chunk_size)]


def execute_jobs(jobs: Sequence[ChunkJob], workers: int) -> List[TrialResult]:
    """Run chunk jobs in order, in a process pool when workers > 1."""
    if workers <= 1 or len(jobs) <= 1:
        chunks = [run_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            chunks = list(pool.map(run_chunk, jobs))
    return [result for chunk in chunks for result in chunk]


@dataclass
class ExperimentRun:
    """Outcome of run_trials: aggregates, raw trial results and the resources they came from."""

    config: ExperimentConfig
    resources: ExperimentResources
    settings: Settings
    metrics: Dict[str, AggregateMetrics] = field(default_factory=dict)
    results: Dict[str, List[TrialResult]] = field(default_factory=dict)
    error_bound_M: Optional[float] = None

    def metadata(self) -> Dict[str, Any]:
        """JSON-ready description of the run; contains nothing that varies between identical runs."""
        return {
            "tool": "perfclip",
            "version": __version__,
            "seed": self.config.experiment.seed,
            "config": self.config.resolved(),
            "problem": self.resources.metadata(),
            "measured": {
                "G": self.resources.constants.G_measured,
                "sigma0": self.resources.constants.sigma0,
                "sigma1": self.resources.constants.sigma1,
                "M": self.error_bound_M,
            },
            "chunking": {"chunk_size": self.settings.CHUNK_SIZE, "stream_block": self.settings.STREAM_BLOCK},
            "algorithms": {name: m.summary() for name, m in self.metrics.items()},
        }


def _resolve_workers(config: ExperimentConfig, settings: Settings, workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, int(workers))
    if config.experiment.workers is not None:
        return config.experiment.workers
    return settings.WORKERS


def run_trials(
    config: ExperimentConfig,
    settings: Optional[Settings] = None,
    workers: Optional[int] = None,
    schedules: Optional[Dict[str, StepSchedule]] = None,
    resources: Optional[ExperimentResources] = None,
) -> ExperimentRun:
    """
    Run n_trials independent trajectories of every configured algorithm and aggregate them.

    Args:
        config: Experiment configuration
        settings: Process settings (chunk size, stream block, default workers)
        workers: Worker processes; overrides the config and settings
        schedules: Per-algorithm step-size schedules replacing the configured one
        resources: Prebuilt resources for config (rebuilt when omitted)

    Returns:
        ExperimentRun with one AggregateMetrics per algorithm

    Raises:
        ConfigError: If the oracle cannot be resolved (before any trial runs)
        NumericalFailureError: If a stochastic gradient stops being finite
    """
    settings = settings or Settings()
    resources = resources or ExperimentResources(config)
    n_workers = _resolve_workers(config, settings, workers)
    exp = config.experiment

    # resolve everything that can fail before the first step
    recorder = resources.recorder()
    resources.check_stability()
    theta0 = resources.theta0
    optimizers = {
        name: resources.optimizer_config(name, (schedules or {}).get(name)) for name in exp.algorithms
    }

    run = ExperimentRun(config, resources, settings)
    groups = chunk_trials(exp.n_trials, settings.CHUNK_SIZE)
    for name in exp.algorithms:
        started = time.perf_counter()
        logger.info(f"Running {exp.n_trials} {name} trials for T={exp.T} on {n_workers} worker(s)")
        jobs = [
            ChunkJob(name, optimizers[name], resources.loss, resources.distribution, recorder,
                     theta0, exp.T, exp.seed, trials, settings.STREAM_BLOCK)
            for trials in groups
        ]
        results = execute_jobs(jobs, n_workers)
        metrics = aggregate(results, resources.metric(name))
        try:
            metrics.decay = fit_decay_exponent(metrics.t, metrics.mean, exp.fit_tail)
        except FitError as e:
            logger.debug(f"No decay fit for {name}: {e}")
        run.results[name] = results
        run.metrics[name] = metrics
        logger.info(
            f"{name}: final mean {metrics.metric}={metrics.final_mean:.6g} "
            f"(+/- {metrics.final_stderr:.2g}, {metrics.diverged_count} diverged) in {time.perf_counter() - started:.1f}s"
        )

    if "dicesgd" in run.results:
        run.error_bound_M = (
            config.bounds.M if config.bounds.M is not None else empirical_error_bound(run.results["dicesgd"])
        )
    if config.bounds.overlay:
        for name, metrics in run.metrics.items():
            metrics.bound = bound_overlay(run, name, optimizers[name])
    return run


def bound_overlay(run: ExperimentRun, algorithm: str, optimizer: OptimizerConfig) -> Optional[np.ndarray]:
    """
    Bound curve at the recorded t for the algorithm's primary metric, or None when it does not apply.

    PCSGD gets the strongly convex bound on ||theta_t - theta_PS||^2, DiceSGD the
    bound on ||theta_t - gamma_t e_t - theta_PS||^2.
    """
    metrics = run.metrics[algorithm]
    resources, cfg = run.resources, run.config
    expected = {"pcsgd": "distance_sq", "dicesgd": "shadow_distance_sq"}.get(algorithm)
    if expected is None or metrics.metric != expected or cfg.oracle.target != "ps":
        logger.warning(f"No bound overlay for {algorithm} with metric {metrics.metric}")
        return None

    k = resources.constants
    gap = resources.initial_gap_sq()
    ts = metrics.t
    try:
        if algorithm == "pcsgd":
            params = ScvxBoundParams(k.mu_tilde, optimizer.clip_c, k.G, resources.dim, optimizer.sigma_dp, gap, optimizer.schedule)
            curve = thm1_curve(params, np.maximum(ts - 1, 0))
        else:
            bcfg = cfg.bounds
            missing = [key for key in ("B", "b", "b_bar") if getattr(bcfg, key) is None]
            if missing:
                logger.warning(f"DiceSGD bound overlay needs bounds.{', bounds.'.join(missing)}")
                return None
            params = DiceBoundParams(
                k.mu_tilde, k.G, bcfg.B, resources.dim, optimizer.sigma_dp, k.L, run.error_bound_M,
                cfg.distribution.beta, bcfg.b, bcfg.b_bar, gap, optimizer.schedule,
            )
            curve = thm4_curve(params, np.maximum(ts - 1, 0))
    except PreconditionError as e:
        logger.warning(f"No bound overlay for {algorithm}: {e}")
        return None
    return np.where(ts == 0, gap, curve)
