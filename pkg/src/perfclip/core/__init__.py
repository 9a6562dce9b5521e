"""
Core operators and step-size schedules.
"""
from .operators import (
    UNBOUNDED,
    BoxRegion,
    ParamVector,
    Region,
    UnboundedRegion,
    as_param_vector,
    clip,
    clip_rows,
    project,
)
from .schedules import (
    ConstantSchedule,
    PolynomialSchedule,
    ScheduleReport,
    StepSchedule,
    TheoreticalOptimalSchedule,
    schedule_value,
    schedule_values,
    validate_schedule_scvx,
)

__all__ = [
    "UNBOUNDED",
    "BoxRegion",
    "ParamVector",
    "Region",
    "UnboundedRegion",
    "as_param_vector",
    "clip",
    "clip_rows",
    "project",
    "ConstantSchedule",
    "PolynomialSchedule",
    "ScheduleReport",
    "StepSchedule",
    "TheoreticalOptimalSchedule",
    "schedule_value",
    "schedule_values",
    "validate_schedule_scvx",
]
