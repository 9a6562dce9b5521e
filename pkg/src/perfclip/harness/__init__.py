"""
Experiment harness: configuration, resources, trial runner, metrics, sweeps and output.
"""
from .metrics import (
    AggregateMetrics,
    DecayFit,
    aggregate,
    empirical_error_bound,
    fit_decay_exponent,
    plateau,
    running_min,
    trend_slope,
)
from .output import emit_results, read_table, to_jsonable, write_json, write_table
from .resources import (
    ExperimentResources,
    MeasuredConstants,
    OracleValues,
    measure_gradient_bound,
    measure_loss_bound,
    measure_variance_constants,
)
from .runner import ExperimentRun, bound_overlay, chunk_trials, run_trials
from .schema import ExperimentConfig, apply_overrides, load_config, parse_override, validate_config, with_updates
from .sweeps import BiasRow, PrivacyRow, bias_sweep, privacy_tradeoff_sweep

__all__ = [
    "AggregateMetrics",
    "DecayFit",
    "aggregate",
    "empirical_error_bound",
    "fit_decay_exponent",
    "plateau",
    "running_min",
    "trend_slope",
    "emit_results",
    "read_table",
    "to_jsonable",
    "write_json",
    "write_table",
    "ExperimentResources",
    "MeasuredConstants",
    "OracleValues",
    "measure_gradient_bound",
    "measure_loss_bound",
    "measure_variance_constants",
    "ExperimentRun",
    "bound_overlay",
    "chunk_trials",
    "run_trials",
    "ExperimentConfig",
    "apply_overrides",
    "load_config",
    "parse_override",
    "validate_config",
    "with_updates",
    "BiasRow",
    "PrivacyRow",
    "bias_sweep",
    "privacy_tradeoff_sweep",
]
