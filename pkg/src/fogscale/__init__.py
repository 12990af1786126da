"""Capacity planning for fog nodes: M/M/m priority queueing, threshold scaling and a DES cross-check."""

from fogscale.analytics import (
    ArrivalProfile,
    ClassMix,
    ClassUtilization,
    DelayReport,
    InstabilityError,
    ParameterError,
    QueueParameters,
    full_report,
)
from fogscale.controller import ScalingDecision, ScalingPolicy, ScalingState, controller_step
from fogscale.des import SimConfig, SimStats, run_simulation

__version__ = "0.1.0"

__all__ = [
    "ArrivalProfile",
    "ClassMix",
    "ClassUtilization",
    "DelayReport",
    "InstabilityError",
    "ParameterError",
    "QueueParameters",
    "ScalingDecision",
    "ScalingPolicy",
    "ScalingState",
    "SimConfig",
    "SimStats",
    "controller_step",
    "full_report",
    "run_simulation",
]
