"""
Privacy calibration, reference oracles and bound evaluators.
"""
from .bounds import (
    DiceBoundParams,
    NcvxBound,
    NcvxBoundParams,
    ScvxBoundParams,
    bias_upper_scvx,
    check_dice_schedule,
    dice_ncvx_bias,
    ncvx_bias,
    thm1_curve,
    thm1_rhs,
    thm3_rhs,
    thm4_curve,
    thm4_leading_term,
    thm4_rhs,
    thm5_rhs,
)
from .oracles import (
    FixedPointResult,
    QuadraticInstance,
    quadratic_bias,
    quadratic_gradient_bound,
    solve_clipped_fixed_point,
    solve_ps_root,
    solve_ps_rrm,
    theta_inf_quadratic,
    theta_ps_quadratic,
)
from .privacy import (
    ClipThreshold,
    PrivacyBudget,
    dp_sigma,
    naive_step_size,
    optimal_clip_threshold,
    optimal_step_size,
    privacy_ratio,
    step_size_delta,
)

__all__ = [
    "DiceBoundParams",
    "NcvxBound",
    "NcvxBoundParams",
    "ScvxBoundParams",
    "bias_upper_scvx",
    "check_dice_schedule",
    "dice_ncvx_bias",
    "ncvx_bias",
    "thm1_curve",
    "thm1_rhs",
    "thm3_rhs",
    "thm4_curve",
    "thm4_leading_term",
    "thm4_rhs",
    "thm5_rhs",
    "FixedPointResult",
    "QuadraticInstance",
    "quadratic_bias",
    "quadratic_gradient_bound",
    "solve_clipped_fixed_point",
    "solve_ps_root",
    "solve_ps_rrm",
    "theta_inf_quadratic",
    "theta_ps_quadratic",
    "ClipThreshold",
    "PrivacyBudget",
    "dp_sigma",
    "naive_step_size",
    "optimal_clip_threshold",
    "optimal_step_size",
    "privacy_ratio",
    "step_size_delta",
]
