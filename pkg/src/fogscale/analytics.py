"""Closed-form M/M/m results and two-class non-preemptive priority delays.

Every function here is pure. Delays are mean *queueing* delays (time spent
waiting before service starts); add ``1/mu`` via :func:`sojourn_time` for the
time spent in the system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

#: A configuration counts as stable only if utilization <= 1 - STABILITY_MARGIN.
STABILITY_MARGIN = 1e-9

# Rescale the running Erlang terms once they pass this size.
_RESCALE_AT = 1e200


class ParameterError(ValueError):
    """Inputs violate a structural constraint (negative rate, alpha+beta > 1, ...)."""


class InstabilityError(ValueError):
    """The queue (or a priority class) has utilization at or above one."""

    def __init__(self, message: str, rho: float):
        super().__init__(message)
        self.rho = rho


def _check_stable(rho: float, what: str = "utilization") -> None:
    if not rho <= 1.0 - STABILITY_MARGIN:
        raise InstabilityError(f"unstable queue: {what} rho={rho:.6g} >= 1", rho)


@dataclass(frozen=True)
class QueueParameters:
    """The (lambda, mu, m) triple of an M/M/m queue.

    ``arrival_rate`` may be zero; that degenerate case yields an empty system
    with every waiting quantity equal to zero.
    """

    arrival_rate: float
    service_rate: float
    servers: int

    def __post_init__(self):
        if not (self.arrival_rate >= 0 and math.isfinite(self.arrival_rate)):
            raise ParameterError(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if not (self.service_rate > 0 and math.isfinite(self.service_rate)):
            raise ParameterError(f"service_rate must be > 0, got {self.service_rate}")
        if isinstance(self.servers, bool) or int(self.servers) != self.servers or self.servers < 1:
            raise ParameterError(f"servers must be a positive integer, got {self.servers}")
        object.__setattr__(self, "servers", int(self.servers))

    @property
    def utilization(self) -> float:
        return utilization(self)

    @property
    def offered_load(self) -> float:
        """lambda/mu, in Erlangs."""
        return self.arrival_rate / self.service_rate

    @property
    def is_stable(self) -> bool:
        return self.utilization <= 1.0 - STABILITY_MARGIN

    def with_servers(self, servers: int) -> "QueueParameters":
        return QueueParameters(self.arrival_rate, self.service_rate, servers)


@dataclass(frozen=True)
class ArrivalProfile:
    """Per-device arrival rates plus the rate diverted to the cloud."""

    device_rates: Sequence[float]
    cloud_offload_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "device_rates", tuple(float(r) for r in self.device_rates))
        if any(not (r >= 0) for r in self.device_rates):
            raise ParameterError("device rates must be non-negative")
        if not self.cloud_offload_rate >= 0:
            raise ParameterError("cloud_offload_rate must be non-negative")


@dataclass(frozen=True)
class ClassMix:
    """Traffic split: ``alpha`` delay-sensitive, ``beta`` system-critical (SCT), rest delay-insensitive.

    ``sct_in_class1`` says which priority queue the SCT share joins.
    """

    alpha: float
    beta: float = 0.0
    sct_in_class1: bool = False

    def __post_init__(self):
        if not (0 <= self.alpha <= 1) or not (0 <= self.beta <= 1):
            raise ParameterError(f"alpha and beta must lie in [0, 1], got {self.alpha}, {self.beta}")
        if self.alpha + self.beta > 1 + 1e-12:
            raise ParameterError(f"alpha + beta must not exceed 1, got {self.alpha + self.beta}")

    @property
    def class1_share(self) -> float:
        return self.alpha + self.beta if self.sct_in_class1 else self.alpha

    def placed(self, sct_in_class1: bool) -> "ClassMix":
        return ClassMix(self.alpha, self.beta, sct_in_class1)


#: All traffic in one class; used for the schemes without priorities.
SINGLE_CLASS = ClassMix(alpha=1.0, beta=0.0, sct_in_class1=False)


@dataclass(frozen=True)
class ClassUtilization:
    rho1: float
    rho2: float

    @property
    def total(self) -> float:
        return self.rho1 + self.rho2


@dataclass(frozen=True)
class DelayReport:
    p0: float
    p_wait: float
    mean_tasks: float
    residual: float
    w1: float
    w2: float
    rho1: float
    rho2: float
    service_rate: float = field(default=1.0, repr=False)

    @property
    def sojourn1(self) -> float:
        return sojourn_time(self.w1, self.service_rate)

    @property
    def sojourn2(self) -> float:
        return sojourn_time(self.w2, self.service_rate)


def net_arrival_rate(profile: ArrivalProfile) -> float:
    """Total device arrivals minus the cloud-offloaded stream."""
    total = math.fsum(profile.device_rates)
    net = total - profile.cloud_offload_rate
    if net < 0:
        if net > -1e-12 * max(total, 1.0):
            return 0.0
        raise ParameterError(
            f"cloud offload rate {profile.cloud_offload_rate} exceeds total device rate {total}"
        )
    return net


def utilization(params: QueueParameters) -> float:
    return params.arrival_rate / (params.servers * params.service_rate)


def _erlang(params: QueueParameters) -> tuple[float, float]:
    """Return (p0, p_wait) without forming factorials.

    Terms (m rho)^k / k! are built by ratio and rescaled whenever they grow
    large, so p_wait is exact for any m and p0 only underflows gracefully.
    """
    rho = utilization(params)
    _check_stable(rho)
    m = params.servers
    a = params.offered_load
    if a == 0.0:
        return 1.0, 0.0
    log_scale = 0.0
    term = 1.0
    head = 0.0
    for k in range(m):
        head += term
        term *= a / (k + 1)
        if term > _RESCALE_AT:
            head /= term
            log_scale += math.log(term)
            term = 1.0
    tail = term / (1.0 - rho)
    total = head + tail
    p0 = 1.0 / total if log_scale == 0.0 else math.exp(-log_scale - math.log(total))
    return p0, tail / total


def steady_state_p0(params: QueueParameters) -> float:
    """Probability that the system is empty."""
    return _erlang(params)[0]


def wait_probability(params: QueueParameters) -> float:
    """Erlang-C: probability that an arriving task finds all servers busy."""
    return _erlang(params)[1]


def mean_tasks(params: QueueParameters) -> float:
    rho = utilization(params)
    p_wait = wait_probability(params)
    return params.servers * rho + rho / (1.0 - rho) * p_wait


def class_utilizations(rho: float, mix: ClassMix) -> ClassUtilization:
    if not rho >= 0:
        raise ParameterError(f"rho must be non-negative, got {rho}")
    _check_stable(rho)
    rho1 = mix.class1_share * rho
    return ClassUtilization(rho1=rho1, rho2=rho - rho1)


def residual_service_time(
    p_wait: float,
    params: QueueParameters,
    util: ClassUtilization,
    class1_rate: float | None = None,
    class2_rate: float | None = None,
) -> float:
    """Mean remaining service seen by an arrival: P_m/(m rho) * (rho1/mu1 + rho2/mu2).

    Class service rates default to the common ``params.service_rate``, in
    which case the result reduces to P_m/(m mu).
    """
    mu1 = params.service_rate if class1_rate is None else class1_rate
    mu2 = params.service_rate if class2_rate is None else class2_rate
    rho = utilization(params)
    if p_wait == 0.0 or rho == 0.0:
        return 0.0
    return p_wait / (params.servers * rho) * (util.rho1 / mu1 + util.rho2 / mu2)


def class_delays(w0: float, util: ClassUtilization) -> tuple[float, float]:
    """Mean queueing delay of the high and low priority classes."""
    if util.rho1 < 0 or util.rho2 < 0:
        raise ParameterError("class utilizations must be non-negative")
    _check_stable(util.rho1, "class-1 utilization")
    _check_stable(util.total, "total utilization")
    w1 = w0 / (1.0 - util.rho1)
    w2 = w1 / (1.0 - util.total)
    return w1, w2


def sojourn_time(wait: float, service_rate: float) -> float:
    return wait + 1.0 / service_rate


def full_report(params: QueueParameters, mix: ClassMix) -> DelayReport:
    p0, p_wait = _erlang(params)
    rho = utilization(params)
    util = class_utilizations(rho, mix)
    w0 = residual_service_time(p_wait, params, util)
    w1, w2 = class_delays(w0, util)
    return DelayReport(
        p0=p0,
        p_wait=p_wait,
        mean_tasks=params.servers * rho + rho / (1.0 - rho) * p_wait,
        residual=w0,
        w1=w1,
        w2=w2,
        rho1=util.rho1,
        rho2=util.rho2,
        service_rate=params.service_rate,
    )


def single_class_wait(params: QueueParameters) -> float:
    """Mean wait of plain FCFS M/M/m, i.e. P_m / (m mu - lambda)."""
    return full_report(params, SINGLE_CLASS).w1
