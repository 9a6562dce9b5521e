"""
Parameter sweeps over the sensitivity beta and the privacy budget epsilon.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

from ..analysis.bounds import ScvxBoundParams, bias_upper_scvx
from ..analysis.oracles import quadratic_bias
from ..config import Settings
from ..errors import CalibrationError, PreconditionError
from .metrics import plateau
from .resources import ExperimentResources
from .runner import run_trials
from .schema import ExperimentConfig, with_updates

logger = logging.getLogger("perfclip.harness.sweeps")


@dataclass
class BiasRow:
    """One beta of the bias-amplification sweep."""

    beta: float
    plateau: float
    plateau_stderr: float
    closed_form_bias: float
    bias_upper: float
    unstable: bool = False
    diverged: int = 0

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class PrivacyRow:
    """One epsilon of the privacy trade-off sweep."""

    epsilon: float
    sigma_dp: float
    gamma_opt: float
    gamma_naive: float
    final_opt: float
    final_opt_stderr: float
    final_naive: float
    final_naive_stderr: float
    flagged: str = ""

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def bias_sweep(
    config: ExperimentConfig,
    betas: Optional[Sequence[float]] = None,
    settings: Optional[Settings] = None,
    workers: Optional[int] = None,
) -> List[BiasRow]:
    """
    Empirical clipping bias of noiseless PCSGD against its closed form, per beta.

    The plateau is the mean of the final sweep.plateau_fraction of recorded
    points of mean ||theta_t - theta_PS||^2. Rows with beta >= mu/L are flagged
    unstable and not run.
    """
    betas = list(config.sweep.beta_grid if betas is None else betas)
    rows = []
    for beta in betas:
        cfg = with_updates(config, {
            "distribution.beta": beta,
            "experiment.algorithms": ["pcsgd"],
            "experiment.metric": "distance_sq",
            "optimizer.sigma_dp": 0.0,
            "privacy.calibrate": False,
            "oracle.kind": "closed-form",
            "oracle.target": "ps",
        })
        resources = ExperimentResources(cfg)
        k = resources.constants
        if k.mu_tilde <= 0:
            logger.warning(f"beta={beta:g} >= mu/L: row flagged unstable")
            rows.append(BiasRow(beta, math.nan, math.nan, math.nan, math.nan, unstable=True))
            continue

        closed = quadratic_bias(resources.quadratic_instance())
        params = ScvxBoundParams(
            k.mu_tilde, cfg.optimizer.c, k.G, resources.dim, 0.0, resources.initial_gap_sq(), resources.schedule()
        )
        run = run_trials(cfg, settings, workers, resources=resources)
        metrics = run.metrics["pcsgd"]
        level = plateau(metrics.mean, cfg.sweep.plateau_fraction)
        err = plateau(metrics.stderr, cfg.sweep.plateau_fraction)
        rows.append(BiasRow(beta, level, err, closed, bias_upper_scvx(params), diverged=metrics.diverged_count))
        logger.info(f"beta={beta:g}: plateau={level:.6g} closed-form={closed:.6g}")
    return rows


def privacy_tradeoff_sweep(
    config: ExperimentConfig,
    epsilons: Optional[Sequence[float]] = None,
    settings: Optional[Settings] = None,
    workers: Optional[int] = None,
) -> List[PrivacyRow]:
    """
    Final error of DP PCSGD under the optimal and the shift-unaware constant steps, per epsilon.

    Calibration or step-size failures flag the row instead of aborting the sweep.
    """
    epsilons = list(config.sweep.epsilon_grid if epsilons is None else epsilons)
    rows = []
    for epsilon in epsilons:
        cfg = with_updates(config, {
            "privacy.calibrate": True,
            "privacy.epsilon": epsilon,
            "experiment.algorithms": ["pcsgd"],
            "experiment.metric": "distance_sq",
            "oracle.target": "ps",
        })
        resources = ExperimentResources(cfg)
        try:
            sigma = resources.sigma_dp
            optimal = resources.optimal_schedule()
            naive = resources.naive_schedule()
        except (CalibrationError, PreconditionError) as e:
            logger.warning(f"epsilon={epsilon:g}: row flagged ({e})")
            nan = math.nan
            rows.append(PrivacyRow(epsilon, nan, nan, nan, nan, nan, nan, nan, flagged=e.category))
            continue

        finals = {}
        for label, schedule in (("opt", optimal), ("naive", naive)):
            run = run_trials(cfg, settings, workers, schedules={"pcsgd": schedule}, resources=resources)
            finals[label] = run.metrics["pcsgd"]
        rows.append(PrivacyRow(
            epsilon,
            sigma,
            float(optimal.value(1)),
            float(naive.value(1)),
            finals["opt"].final_mean,
            finals["opt"].final_stderr,
            finals["naive"].final_mean,
            finals["naive"].final_stderr,
        ))
        logger.info(
            f"epsilon={epsilon:g}: sigma_DP={sigma:.4g} final error {finals['opt'].final_mean:.6g} (optimal) "
            f"vs {finals['naive'].final_mean:.6g} (naive)"
        )
    return rows
