"""
Analysis commands: reference points, privacy calibration and bound checks.

Handlers return plain dicts. A quantity whose hypotheses fail is reported as
{"error": ...} next to the others rather than aborting the command.
"""
import logging
from dataclasses import asdict
from typing import Any, Dict

import numpy as np

from ..analysis.bounds import (
    DiceBoundParams,
    NcvxBoundParams,
    ScvxBoundParams,
    bias_upper_scvx,
    thm1_curve,
    thm1_rhs,
    thm3_rhs,
    thm4_curve,
    thm4_leading_term,
    thm4_rhs,
    thm5_rhs,
)
from ..analysis.oracles import quadratic_bias
from ..analysis.privacy import dp_sigma, optimal_clip_threshold, privacy_ratio
from ..errors import ConfigError, PerfclipError, PreconditionError
from ..harness.output import emit_results, write_table
from ..harness.resources import ExperimentResources
from ..harness.runner import run_trials
from ..harness.schema import with_updates
from ..models.distributions import performative_risk
from .base import Command, CommandContext, Option

logger = logging.getLogger("perfclip.commands.analysis")

oracle_command = Command(
    name="oracle",
    description="Resolve theta_PS, theta_inf and the clipping bias of the configured instance",
)

calibrate_command = Command(
    name="calibrate",
    description="Calibrate sigma_DP for the privacy budget and report phi, c* and the step sizes",
)

check_bounds_command = Command(
    name="check-bounds",
    description="Evaluate the convergence bounds for the configured instance",
    options=(
        Option(
            ("--empirical",),
            {"action": "store_true", "help": "Also run the trials and count points where mean - 3 stderr exceeds the bound"},
        ),
    ),
)


def _guarded(fn):
    try:
        return fn()
    except PerfclipError as e:
        return {"error": str(e), "category": e.category}


def handle_oracle(context: CommandContext, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """
    Handle the oracle command.

    Returns:
        Oracle values, measured constants and, for the quadratic instance, the bias sandwich
    """
    resources = context.resources
    result: Dict[str, Any] = {"oracle": resources.oracle.as_dict(), "constants": resources.constants.as_dict()}
    if context.config.oracle.kind == "closed-form":
        inst = resources.quadratic_instance()
        result["closed_form_bias"] = quadratic_bias(inst)

        def upper():
            k = resources.constants
            params = ScvxBoundParams(
                k.mu_tilde, inst.c, k.G, resources.dim, resources.sigma_dp, resources.initial_gap_sq(), resources.schedule()
            )
            return bias_upper_scvx(params)

        result["bias_upper"] = _guarded(upper)
    return result


def handle_calibrate(context: CommandContext, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """
    Handle the calibrate command.

    Raises:
        ConfigError: If privacy.epsilon is not set
    """
    resources = context.resources
    budget = resources.budget()
    if budget is None:
        raise ConfigError("calibration needs privacy.epsilon", "privacy.epsilon")
    c = context.config.optimizer.c
    sigma = dp_sigma(c, budget, strict=context.config.privacy.strict)
    result: Dict[str, Any] = {
        "sigma_dp": sigma,
        "c": c,
        "budget": asdict(budget),
        "epsilon_limit": budget.epsilon_limit,
        "within_limit": budget.within_limit,
        "phi": privacy_ratio(budget),
    }

    k = resources.constants
    threshold = optimal_clip_threshold(
        k.G, budget.m, budget.epsilon, budget.delta, budget.d, k.mu_tilde if k.mu_tilde > 0 else None
    )
    result["c_star"] = threshold.c_star
    result["deviation_scale"] = threshold.deviation_scale
    result["G"] = k.G

    if resources.oracle.theta_ps is not None:
        calibrated = ExperimentResources(with_updates(context.config, {"privacy.calibrate": True}))
        result["gamma_opt"] = _guarded(lambda: float(calibrated.optimal_schedule().value(1)))
        result["gamma_naive"] = _guarded(lambda: float(calibrated.naive_schedule().value(1)))
    logger.info(f"sigma_DP={sigma:.6g} (phi={result['phi']:.3g}, c*={threshold.c_star:.6g})")
    return result


def _delta0(resources: ExperimentResources) -> float:
    """Initial performative risk gap f(theta_0; theta_0) - l*, or l_max when it cannot be evaluated."""
    loss, dist = resources.loss, resources.distribution
    theta0 = resources.theta0
    if dist.support(theta0) is None:
        return resources.constants.loss_max - loss.loss_floor
    return float(performative_risk(dist, loss, theta0)) - loss.loss_floor


def _per_t(fn, ts: np.ndarray) -> np.ndarray:
    """fn at each t >= 1; NaN at t = 0 and wherever the step condition fails."""
    values = np.full(ts.size, np.nan)
    for i, t in enumerate(ts):
        if t < 1:
            continue
        try:
            values[i] = fn(int(t))
        except PreconditionError:
            pass
    return values


def _iterate_curve(curve, params, ts: np.ndarray, gap: float) -> np.ndarray:
    """A bound on step t+1 read at t - 1, with the initial gap at t = 0."""
    return np.where(ts == 0, gap, curve(params, np.maximum(ts - 1, 0)))


def handle_check_bounds(context: CommandContext, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """
    Handle the check-bounds command.

    Evaluates every bound whose constants are available at t = T and writes
    the bound curves on the recording grid to bounds.csv. With --empirical the
    trials are run with the bound overlay and the number of recorded points
    where mean - 3 stderr exceeds the bound is reported.
    """
    config, resources = context.config, context.resources
    k = resources.constants
    T, opt = config.experiment.T, config.optimizer
    sigma = resources.sigma_dp
    result: Dict[str, Any] = {"T": T, "constants": k.as_dict(), "sigma_dp": sigma}

    def scvx_params():
        return ScvxBoundParams(k.mu_tilde, opt.c, k.G, resources.dim, sigma, resources.initial_gap_sq(), resources.schedule())

    def ncvx_params():
        return NcvxBoundParams(
            _delta0(resources), k.L, k.sigma0, k.sigma1, k.loss_max, config.distribution.beta, opt.c, k.G, sigma_dp=sigma
        )

    def dice_params():
        b = config.bounds
        missing = [key for key in ("B", "M", "b", "b_bar") if getattr(b, key) is None]
        if missing:
            raise PreconditionError("DiceSGD bound constants", [f"bounds.{key} is not set" for key in missing])
        return DiceBoundParams(
            k.mu_tilde, k.G, b.B, resources.dim, sigma, k.L, b.M, config.distribution.beta,
            b.b, b.b_bar, resources.initial_gap_sq(), resources.schedule(),
        )

    def dice_ncvx_rhs():
        if config.bounds.M is None:
            raise PreconditionError("non-convex DiceSGD bound", ["bounds.M is not set"])
        delta0 = _delta0(resources)

        def rhs(horizon: int) -> float:
            return thm5_rhs(
                opt.c1, opt.c2, sigma, k.loss_max, config.distribution.beta, resources.dim,
                delta0, k.L, k.sigma0, k.sigma1, config.bounds.M, horizon,
            )

        return rhs

    def scvx():
        params = scvx_params()
        return {"rhs": thm1_rhs(params, T - 1), "bias_upper": bias_upper_scvx(params)}

    def dice():
        params = dice_params()
        return {"rhs": thm4_rhs(params, T - 1), "leading_term": thm4_leading_term(params, T - 1)}

    result["pcsgd_strongly_convex"] = _guarded(scvx)
    result["pcsgd_nonconvex"] = _guarded(lambda: asdict(thm3_rhs(ncvx_params(), T)))
    result["dicesgd_strongly_convex"] = _guarded(dice)
    result["dicesgd_nonconvex"] = _guarded(lambda: {"rhs": dice_ncvx_rhs()(T)})

    thinning = config.experiment.thinning
    ts = np.arange(T // thinning + 1, dtype=np.int64) * thinning

    def pcsgd_ncvx_curve():
        params = ncvx_params()
        return _per_t(lambda t: thm3_rhs(params, t).weighted_average, ts)

    builders = {
        "pcsgd_scvx": lambda: _iterate_curve(thm1_curve, scvx_params(), ts, resources.initial_gap_sq()),
        "dicesgd_scvx": lambda: _iterate_curve(thm4_curve, dice_params(), ts, resources.initial_gap_sq()),
        "pcsgd_ncvx": pcsgd_ncvx_curve,
        "dicesgd_ncvx": lambda: _per_t(dice_ncvx_rhs(), ts),
    }
    columns: Dict[str, np.ndarray] = {"t": ts}
    for name, build in builders.items():
        try:
            columns[name] = build()
        except PerfclipError as e:
            logger.info(f"Omitting {name} from bounds.csv: {e}")
    rows = [{name: values[i] for name, values in columns.items()} for i in range(ts.size)]
    result["files"] = [str(write_table(rows, context.out_dir / "bounds.csv"))]

    if arguments.get("empirical"):
        checked = with_updates(config, {"bounds.overlay": True})
        run = run_trials(checked, context.settings, context.workers, resources=ExperimentResources(checked))
        emit_results(run, context.out_dir)
        empirical = {}
        for name, metrics in run.metrics.items():
            if metrics.bound is None:
                empirical[name] = {"error": "no bound applies to this algorithm's metric"}
                continue
            excess = metrics.mean - 3.0 * metrics.stderr - metrics.bound
            empirical[name] = {
                "violations": int(np.sum(excess > 0)),
                "points": int(metrics.t.size),
                "worst_excess": float(np.max(excess)),
            }
        result["empirical"] = empirical
    return result
