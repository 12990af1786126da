"""Seeded discrete-event simulation of M/M/m with two non-preemptive priority classes.

The engine is a future-event calendar (a binary heap keyed by time, FIFO on
ties through a sequence counter). Only the next arrival is ever scheduled.
When a server frees up it takes the head of the class-1 queue, else the head
of the class-2 queue; a task in service is never interrupted.

Each replication draws one block of uniforms from a PCG64 stream, three per
task in the order (inter-arrival, class label, service demand), and turns
them into exponentials by inverse transform: ``-log(1 - u) / rate``.
"""

from __future__ import annotations

import heapq
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from fogscale.analytics import ClassMix, ParameterError, QueueParameters

MIN_POST_WARMUP_TASKS = 10_000

ARRIVAL, DEPARTURE = 0, 1
TRACE_HEADER = "time,event,task,class,queue1,queue2,busy"

# per-task labels drawn from the class uniform
LABEL_CLASS1, LABEL_SCT, LABEL_CLASS2 = 1, 0, 2


class InsufficientHorizonError(ParameterError):
    """Too few tasks would survive the warm-up cut."""


class DivergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SimConfig:
    """What to simulate and for how long.

    ``horizon`` is the number of arriving tasks per replication; the first
    ``warmup_fraction`` of them are excluded from every statistic.
    """

    params: QueueParameters
    mix: ClassMix
    horizon: int = 55_556
    warmup_fraction: float = 0.1
    seed: int = 0
    replications: int = 20
    allow_short: bool = False

    def __post_init__(self):
        if not 0 <= self.warmup_fraction < 1:
            raise ParameterError("warmup_fraction must be in [0, 1)")
        if self.replications < 1:
            raise ParameterError("replications must be positive")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.horizon < 1:
            raise ParameterError("horizon must be at least one task")
        if not self.allow_short and self.post_warmup_tasks < MIN_POST_WARMUP_TASKS:
            raise InsufficientHorizonError(
                f"horizon {self.horizon} leaves {self.post_warmup_tasks} post-warmup tasks,"
                f" need at least {MIN_POST_WARMUP_TASKS}"
            )

    @property
    def warmup_tasks(self) -> int:
        return int(self.horizon * self.warmup_fraction)

    @property
    def post_warmup_tasks(self) -> int:
        return self.horizon - self.warmup_tasks


@dataclass(frozen=True)
class TaskRecord:
    id: int
    priority_class: int
    is_sct: bool
    arrival_time: float
    service_start: float
    departure_time: float
    service_demand: float

    @property
    def waiting_time(self) -> float:
        return self.service_start - self.arrival_time


@dataclass
class ReplicationResult:
    seed: int
    mean_w1: float
    mean_w2: float
    mean_w_sct: float
    mean_wait: float
    mean_sojourn: float
    mean_tasks_in_system: float
    utilization_observed: float
    completed: dict[int, int]
    completed_sct: int
    window: tuple[float, float]
    diverging: bool = False
    tasks: list[TaskRecord] | None = field(default=None, repr=False)


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), math.nan
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass
class SimStats:
    """Cross-replication means with their standard errors.

    A mean is ``nan`` when no post-warmup task of that kind was observed.
    """

    mean_w1: float
    se_w1: float
    mean_w2: float
    se_w2: float
    mean_w_sct: float
    se_w_sct: float
    mean_tasks_in_system: float
    se_tasks_in_system: float
    mean_sojourn: float
    se_sojourn: float
    utilization_observed: float
    completed: dict[int, int]
    runs: list[ReplicationResult] = field(repr=False)
    diverging: bool = False

    @classmethod
    def aggregate(cls, runs: list[ReplicationResult]) -> "SimStats":
        w1 = _mean_se([r.mean_w1 for r in runs])
        w2 = _mean_se([r.mean_w2 for r in runs])
        sct = _mean_se([r.mean_w_sct for r in runs])
        pop = _mean_se([r.mean_tasks_in_system for r in runs])
        soj = _mean_se([r.mean_sojourn for r in runs])
        util = _mean_se([r.utilization_observed for r in runs])[0]
        completed = {1: sum(r.completed[1] for r in runs), 2: sum(r.completed[2] for r in runs)}
        return cls(*w1, *w2, *sct, *pop, *soj, util, completed, runs, any(r.diverging for r in runs))


def _exponential(u: np.ndarray, rate: float) -> np.ndarray:
    return -np.log1p(-u) / rate


def run_replication(
    config: SimConfig,
    seed: int,
    *,
    record_tasks: bool = False,
    trace: Callable[[str], object] | None = None,
) -> ReplicationResult:
    """Simulate one independent run and summarise its post-warmup window.

    ``trace``, if given, is called with one CSV line per event
    (see :data:`TRACE_HEADER`); state columns are recorded after the event.
    """
    params, mix = config.params, config.mix
    lam, mu, m = params.arrival_rate, params.service_rate, params.servers
    n = config.horizon
    if lam <= 0:
        raise ParameterError("simulation needs a positive arrival rate")
    diverging = not params.is_stable
    if diverging:
        warnings.warn(f"simulating an unstable queue (rho={params.utilization:.4g})", DivergenceWarning)

    rng = np.random.Generator(np.random.PCG64(seed % 2**64))
    u = rng.random((n, 3))
    arrivals = np.cumsum(_exponential(u[:, 0], lam))
    labels = np.where(u[:, 1] < mix.alpha, LABEL_CLASS1,
                      np.where(u[:, 1] < mix.alpha + mix.beta, LABEL_SCT, LABEL_CLASS2))
    sct_queue = 1 if mix.sct_in_class1 else 2
    queues = np.where(labels == LABEL_CLASS1, 1, np.where(labels == LABEL_SCT, sct_queue, 2))
    demand = _exponential(u[:, 2], mu)

    arr = arrivals.tolist()
    svc = demand.tolist()
    qcls = queues.tolist()
    start = [0.0] * n
    depart = [0.0] * n

    first = config.warmup_tasks
    t_lo = arr[first] if first < n else math.inf
    t_hi = arr[-1]

    q1: deque[int] = deque()
    q2: deque[int] = deque()
    calendar: list[tuple[float, int, int, int]] = [(arr[0], 0, ARRIVAL, 0)]
    seq = 1
    busy = 0
    in_system = 0
    last = 0.0
    pop_area = 0.0
    busy_area = 0.0
    pop = heapq.heappop
    push = heapq.heappush

    while calendar:
        t, _, kind, tid = pop(calendar)
        lo = last if last > t_lo else t_lo
        hi = t if t < t_hi else t_hi
        if hi > lo:
            pop_area += in_system * (hi - lo)
            busy_area += busy * (hi - lo)
        last = t
        if kind == ARRIVAL:
            in_system += 1
            if busy < m:
                busy += 1
                start[tid] = t
                push(calendar, (t + svc[tid], seq, DEPARTURE, tid))
                seq += 1
            elif qcls[tid] == 1:
                q1.append(tid)
            else:
                q2.append(tid)
            nxt = tid + 1
            if nxt < n:
                push(calendar, (arr[nxt], seq, ARRIVAL, nxt))
                seq += 1
            if trace is not None:
                trace(f"{t!r},arrival,{tid},{qcls[tid]},{len(q1)},{len(q2)},{busy}")
        else:
            in_system -= 1
            depart[tid] = t
            if trace is not None:
                trace(f"{t!r},departure,{tid},{qcls[tid]},{len(q1)},{len(q2)},{busy}")
            if q1:
                nid = q1.popleft()
            elif q2:
                nid = q2.popleft()
            else:
                busy -= 1
                if trace is not None:
                    trace(f"{t!r},idle,-1,0,0,0,{busy}")
                continue
            start[nid] = t
            push(calendar, (t + svc[nid], seq, DEPARTURE, nid))
            seq += 1
            if trace is not None:
                trace(f"{t!r},start,{nid},{qcls[nid]},{len(q1)},{len(q2)},{busy}")

    if first >= n:
        raise InsufficientHorizonError("no tasks completed after the warm-up period")

    starts = np.asarray(start[first:])
    waits = starts - arrivals[first:]
    sojourns = np.asarray(depart[first:]) - arrivals[first:]
    kept_queues = queues[first:]
    kept_labels = labels[first:]

    def _class_mean(mask: np.ndarray) -> float:
        return float(waits[mask].mean()) if mask.any() else math.nan

    span = t_hi - t_lo
    result = ReplicationResult(
        seed=seed,
        mean_w1=_class_mean(kept_queues == 1),
        mean_w2=_class_mean(kept_queues == 2),
        mean_w_sct=_class_mean(kept_labels == LABEL_SCT),
        mean_wait=float(waits.mean()),
        mean_sojourn=float(sojourns.mean()),
        mean_tasks_in_system=pop_area / span if span > 0 else 0.0,
        utilization_observed=busy_area / (m * span) if span > 0 else 0.0,
        completed={1: int((kept_queues == 1).sum()), 2: int((kept_queues == 2).sum())},
        completed_sct=int((kept_labels == LABEL_SCT).sum()),
        window=(t_lo, t_hi),
        diverging=diverging,
    )
    if record_tasks:
        result.tasks = [
            TaskRecord(i, qcls[i], bool(labels[i] == LABEL_SCT), arr[i], start[i], depart[i], svc[i])
            for i in range(n)
        ]
    return result


def run_simulation(config: SimConfig) -> SimStats:
    """Run ``config.replications`` runs seeded ``seed, seed+1, ...`` and aggregate them."""
    if config.replications < 2:
        raise ParameterError("at least two replications are needed for a standard error")
    runs = [run_replication(config, (config.seed + r) % 2**64) for r in range(config.replications)]
    return SimStats.aggregate(runs)


def measure_mean_tasks(run: ReplicationResult) -> float:
    """Time-averaged number of tasks in the system over the post-warmup window."""
    return run.mean_tasks_in_system


def write_trace(config: SimConfig, seed: int, out: TextIO) -> ReplicationResult:
    """Run one replication and stream its event trace to ``out``."""
    out.write(TRACE_HEADER + "\n")
    return run_replication(config, seed, trace=lambda line: out.write(line + "\n"))
