"""
Optimizer step functions, random streams and the trajectory runner.
"""
from .optimizers import (
    ALGORITHMS,
    DICE_DP_MULTIPLIER,
    DicesgdState,
    OptimizerConfig,
    PcsgdState,
    dicesgd_step,
    initial_state,
    pcsgd_step,
    sgd_step,
)
from .streams import GeneratorStream, TrialStreams, as_stream, trial_generator
from .trajectory import (
    DIVERGENCE_THRESHOLD,
    TrajectoryRecorder,
    TrialResult,
    run_batch,
    run_trajectory,
)

__all__ = [
    "ALGORITHMS",
    "DICE_DP_MULTIPLIER",
    "DicesgdState",
    "OptimizerConfig",
    "PcsgdState",
    "dicesgd_step",
    "initial_state",
    "pcsgd_step",
    "sgd_step",
    "GeneratorStream",
    "TrialStreams",
    "as_stream",
    "trial_generator",
    "DIVERGENCE_THRESHOLD",
    "TrajectoryRecorder",
    "TrialResult",
    "run_batch",
    "run_trajectory",
]
