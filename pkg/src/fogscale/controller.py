"""Threshold-driven fog-node scaling with dynamic placement of system-critical tasks.

One :func:`controller_step` is one pass of the control loop:

1. evaluate the class-1 delay at the current node count, under the SCT
   placement carried in from the previous step;
2. add nodes while that delay exceeds its threshold, otherwise remove nodes
   while doing so keeps it within the threshold;
3. re-evaluate delays at the new node count;
4. move SCTs to class 1 if the class-2 delay has reached the SCT threshold,
   or back to class 2 if it is below.

A placement change takes effect from the next step; it never triggers a
second scaling pass inside the same step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from fogscale.analytics import (
    SINGLE_CLASS,
    ClassMix,
    ParameterError,
    QueueParameters,
    full_report,
)


@dataclass(frozen=True)
class ScalingPolicy:
    m_min: int
    m_max: int
    w1_threshold: float
    w_sct_threshold: float
    pool_size: int | None = None

    def __post_init__(self):
        if not 1 <= self.m_min <= self.m_max:
            raise ParameterError(f"need 1 <= m_min <= m_max, got {self.m_min}, {self.m_max}")
        if not self.w1_threshold > 0 or not self.w_sct_threshold >= 0:
            raise ParameterError("thresholds must be positive")
        if self.pool_size is None:
            object.__setattr__(self, "pool_size", self.m_max)
        elif self.pool_size < self.m_min:
            raise ParameterError(f"pool_size {self.pool_size} cannot cover m_min {self.m_min}")


@dataclass(frozen=True)
class ScalingState:
    current_m: int
    sct_in_class1: bool = False
    effective_m_max: int | None = None

    @classmethod
    def initial(cls, policy: ScalingPolicy, m_init: int, sct_in_class1: bool = False) -> "ScalingState":
        m = min(max(m_init, policy.m_min), policy.m_max)
        return cls(current_m=m, sct_in_class1=sct_in_class1, effective_m_max=policy.m_max)


@dataclass(frozen=True)
class ScalingDecision:
    """Outcome of one control step.

    ``w1``/``w2``/``w_sct`` are evaluated under the placement *after* the
    step (``sct_in_class1``). ``w1_at_scaling`` is the class-1 delay under the
    placement the node count was chosen with; ``feasible`` refers to it, and
    ``w2_at_scaling`` is the class-2 delay the placement rule compared.
    Delays are ``None`` when the chosen node count cannot keep the queue stable.
    """

    arrival_rate: float
    chosen_m: int
    sct_in_class1: bool
    w1: float | None
    w2: float | None
    w_sct: float | None
    feasible: bool
    scaled_with_sct_in_class1: bool
    w1_at_scaling: float | None
    w2_at_scaling: float | None = None


def class1_delay(arrival_rate: float, service_rate: float, servers: int, mix: ClassMix) -> float:
    """Class-1 mean wait, or ``inf`` where the queue would be unstable."""
    params = QueueParameters(arrival_rate, service_rate, servers)
    if not params.is_stable:
        return math.inf
    return full_report(params, mix).w1


def evaluate_sct_placement(w2: float, policy: ScalingPolicy) -> bool:
    """True when SCTs must join class 1 (the class-2 wait has reached their threshold)."""
    return not policy.w_sct_threshold > w2


def _effective_max(state: ScalingState, policy: ScalingPolicy) -> int:
    return policy.m_max if state.effective_m_max is None else state.effective_m_max


def scale_up(state: ScalingState, arrival_rate: float, service_rate: float, mix: ClassMix,
             policy: ScalingPolicy) -> ScalingState:
    mix = mix.placed(state.sct_in_class1)
    m = state.current_m
    ceiling = _effective_max(state, policy)
    while class1_delay(arrival_rate, service_rate, m, mix) > policy.w1_threshold and m < ceiling:
        if policy.pool_size - m <= 0:
            # pool exhausted: the ceiling drops for the rest of the run
            ceiling = m
            break
        m += 1
    return replace(state, current_m=m, effective_m_max=ceiling)


def scale_down(state: ScalingState, arrival_rate: float, service_rate: float, mix: ClassMix,
               policy: ScalingPolicy) -> ScalingState:
    mix = mix.placed(state.sct_in_class1)
    m = state.current_m
    while m > policy.m_min and class1_delay(arrival_rate, service_rate, m - 1, mix) <= policy.w1_threshold:
        m -= 1
    return replace(state, current_m=m)


def controller_step(
    state: ScalingState,
    arrival_rate: float,
    service_rate: float,
    mix: ClassMix,
    policy: ScalingPolicy,
    *,
    scaling: bool = True,
    priority: bool = True,
) -> tuple[ScalingState, ScalingDecision]:
    """Run one control pass at the given arrival rate.

    With ``priority=False`` all traffic is treated as a single FCFS class and
    the SCT placement logic is skipped. With ``scaling=False`` the node count
    is held fixed.
    """
    if not arrival_rate > 0:
        raise ParameterError(f"arrival_rate must be positive, got {arrival_rate}")
    if priority:
        placement = state.sct_in_class1
    else:
        mix, placement = SINGLE_CLASS, False
        state = replace(state, sct_in_class1=False)
    working = mix.placed(placement)

    if scaling:
        w1_now = class1_delay(arrival_rate, service_rate, state.current_m, working)
        if w1_now > policy.w1_threshold:
            state = scale_up(state, arrival_rate, service_rate, working, policy)
        else:
            state = scale_down(state, arrival_rate, service_rate, working, policy)

    m = state.current_m
    params = QueueParameters(arrival_rate, service_rate, m)
    if not params.is_stable:
        decision = ScalingDecision(arrival_rate, m, placement, None, None, None, False, placement, None)
        return state, decision

    at_scaling = full_report(params, working)
    feasible = at_scaling.w1 <= policy.w1_threshold

    if priority:
        placement = evaluate_sct_placement(at_scaling.w2, policy)
        final = at_scaling if placement == working.sct_in_class1 else full_report(params, working.placed(placement))
        w_sct = final.w1 if placement else final.w2
    else:
        # one FCFS class: its wait is reported for both priority slots
        final = replace(at_scaling, w2=at_scaling.w1)
        w_sct = final.w1

    state = replace(state, sct_in_class1=placement)
    decision = ScalingDecision(
        arrival_rate=arrival_rate,
        chosen_m=m,
        sct_in_class1=placement,
        w1=final.w1,
        w2=final.w2,
        w_sct=w_sct,
        feasible=feasible,
        scaled_with_sct_in_class1=working.sct_in_class1,
        w1_at_scaling=at_scaling.w1,
        w2_at_scaling=at_scaling.w2 if priority else final.w2,
    )
    return state, decision
