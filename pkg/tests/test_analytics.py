import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogscale.analytics import (
    ArrivalProfile,
    ClassMix,
    ClassUtilization,
    InstabilityError,
    ParameterError,
    QueueParameters,
    class_delays,
    class_utilizations,
    full_report,
    mean_tasks,
    net_arrival_rate,
    residual_service_time,
    single_class_wait,
    sojourn_time,
    steady_state_p0,
    utilization,
    wait_probability,
)
from oracles import exact_erlang, mmm_wait, truncated_chain

TABLE1 = ClassMix(alpha=0.2, beta=0.1)


def q(lam, m, mu=1.0):
    return QueueParameters(lam, mu, m)


@pytest.mark.parametrize("rates, offload, expected", [
    ([2, 3, 5], 4, 6.0),
    ([1], 0, 1.0),
    ([0.5, 0.5], 1.0, 0.0),
])
def test_net_arrival_rate(rates, offload, expected):
    assert net_arrival_rate(ArrivalProfile(rates, offload)) == expected


def test_net_arrival_rate_rejects_excess_offload():
    with pytest.raises(ParameterError):
        net_arrival_rate(ArrivalProfile([1.0, 2.0], 3.5))
    with pytest.raises(ParameterError):
        ArrivalProfile([1.0, -1.0], 0.0)


@pytest.mark.parametrize("lam, m, expected", [(1, 2, 0.5), (14, 20, 0.7), (14, 14, 1.0)])
def test_utilization(lam, m, expected):
    assert utilization(q(lam, m)) == pytest.approx(expected, abs=1e-15)


def test_boundary_utilization_is_unstable():
    params = q(14, 14)
    assert not params.is_stable
    with pytest.raises(InstabilityError) as info:
        steady_state_p0(params)
    assert info.value.rho == pytest.approx(1.0)


def test_stability_margin():
    # inside the 1e-9 margin counts as unstable
    with pytest.raises(InstabilityError):
        wait_probability(q(1 - 1e-10, 1))
    assert wait_probability(q(1 - 1e-8, 1)) == pytest.approx(1 - 1e-8)


@pytest.mark.parametrize("bad", [
    dict(arrival_rate=-1, service_rate=1, servers=1),
    dict(arrival_rate=1, service_rate=0, servers=1),
    dict(arrival_rate=1, service_rate=1, servers=0),
    dict(arrival_rate=1, service_rate=1, servers=2.5),
])
def test_queue_parameters_validation(bad):
    with pytest.raises(ParameterError):
        QueueParameters(**bad)


class TestWorkedValues:
    def test_mm1(self):
        params = q(0.5, 1)
        assert steady_state_p0(params) == pytest.approx(0.5, rel=1e-14)
        assert wait_probability(params) == pytest.approx(0.5, rel=1e-14)
        assert mean_tasks(params) == pytest.approx(1.0, rel=1e-14)

    def test_two_servers(self):
        params = q(1, 2)
        assert steady_state_p0(params) == pytest.approx(1 / 3, rel=1e-14)
        assert wait_probability(params) == pytest.approx(1 / 3, rel=1e-14)
        assert mean_tasks(params) == pytest.approx(4 / 3, rel=1e-14)

    def test_fifteen_servers(self):
        # frozen from the truncated-chain and exact-rational oracles
        params = q(10, 15)
        assert steady_state_p0(params) == pytest.approx(4.447939592879826e-05, rel=1e-12)
        assert mean_tasks(params) == pytest.approx(10.204084734015977, rel=1e-12)

    def test_table1_extreme(self):
        assert wait_probability(q(14, 20)) == pytest.approx(0.09356124347143041, rel=1e-12)


@pytest.mark.parametrize("rho, sct, expected", [
    (0.5, False, (0.10, 0.40)),
    (0.5, True, (0.15, 0.35)),
    (0.7, True, (0.21, 0.49)),
])
def test_class_utilizations(rho, sct, expected):
    util = class_utilizations(rho, TABLE1.placed(sct))
    assert (util.rho1, util.rho2) == pytest.approx(expected, abs=1e-15)


def test_class_mix_rejects_overfull():
    with pytest.raises(ParameterError):
        ClassMix(alpha=0.8, beta=0.3)


class TestResidual:
    def test_worked(self):
        params = q(1, 2)
        w0 = residual_service_time(1 / 3, params, ClassUtilization(0.1, 0.4))
        assert w0 == pytest.approx(1 / 6, rel=1e-14)

    def test_no_waiting(self):
        assert residual_service_time(0.0, q(3, 5), ClassUtilization(0.12, 0.48)) == 0.0

    def test_empty_system(self):
        params = q(0.0, 4)
        assert residual_service_time(0.0, params, ClassUtilization(0.0, 0.0)) == 0.0

    def test_table1_extreme(self):
        params = q(14, 20)
        util = class_utilizations(0.7, TABLE1.placed(True))
        w0 = residual_service_time(wait_probability(params), params, util)
        assert w0 == pytest.approx(0.004678062173571521, rel=1e-12)

    def test_general_rates(self):
        # distinct class service rates enter through rho_i / mu_i
        params = q(1, 2)
        w0 = residual_service_time(1 / 3, params, ClassUtilization(0.1, 0.4), class1_rate=2.0, class2_rate=0.5)
        assert w0 == pytest.approx(1 / 3 / 1.0 * (0.1 / 2.0 + 0.4 / 0.5))


class TestClassDelays:
    def test_worked(self):
        w1, w2 = class_delays(1 / 6, ClassUtilization(0.1, 0.4))
        assert w1 == pytest.approx(0.18518518518518517, rel=1e-14)
        assert w2 == pytest.approx(0.37037037037037035, rel=1e-14)

    def test_zero_residual(self):
        assert class_delays(0.0, ClassUtilization(0.3, 0.3)) == (0.0, 0.0)

    def test_table1_extreme(self):
        w1, w2 = class_delays(0.004678062173571521, ClassUtilization(0.21, 0.49))
        assert w1 == pytest.approx(0.005921597688065216, rel=1e-12)
        assert w2 == pytest.approx(0.019738658960217387, rel=1e-12)

    @pytest.mark.parametrize("util", [ClassUtilization(1.0, 0.0), ClassUtilization(0.5, 0.5)])
    def test_unstable(self, util):
        with pytest.raises(InstabilityError):
            class_delays(0.1, util)


class TestFullReport:
    def test_composition(self):
        rep = full_report(q(1, 2), ClassMix(0.2, 0.0))
        assert rep.p0 == pytest.approx(1 / 3)
        assert rep.p_wait == pytest.approx(1 / 3)
        assert rep.mean_tasks == pytest.approx(4 / 3)
        assert rep.residual == pytest.approx(1 / 6)
        assert rep.w1 == pytest.approx(0.18519, abs=5e-6)
        assert rep.w2 == pytest.approx(0.37037, abs=5e-6)
        assert rep.sojourn1 == pytest.approx(rep.w1 + 1.0)

    @pytest.mark.parametrize("lam", [1e-3, 1e-6, 1e-12, 0.0])
    def test_empty_limit(self, lam):
        rep = full_report(q(lam, 15), TABLE1)
        assert rep.p_wait < 1e-30 or lam == 0.0
        assert rep.w1 == pytest.approx(0.0, abs=1e-30)
        assert rep.w2 == pytest.approx(0.0, abs=1e-30)
        if lam == 0.0:
            assert rep.p0 == 1.0 and rep.mean_tasks == 0.0

    def test_single_class_matches_classic_mmm(self):
        for lam, m in [(1, 2), (10, 15), (14, 18), (3.3, 4)]:
            assert single_class_wait(q(lam, m)) == pytest.approx(mmm_wait(lam, 1, m), rel=1e-12)

    def test_sojourn(self):
        assert sojourn_time(0.25, 2.0) == 0.75


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-6, max_value=0.999))
def test_mm1_reduction(rho):
    params = q(rho, 1)
    assert steady_state_p0(params) == pytest.approx(1 - rho, rel=1e-12, abs=1e-12)
    assert wait_probability(params) == pytest.approx(rho, rel=1e-12)
    assert mean_tasks(params) == pytest.approx(rho / (1 - rho), rel=1e-12)


@pytest.mark.parametrize("m", [1, 2, 5, 13, 25])
@pytest.mark.parametrize("rho", [0.1, 0.5, 0.9])
def test_exact_rational_agreement(m, rho):
    lam = rho * m
    p0, pw, k = exact_erlang(lam, 1, m)
    params = q(lam, m)
    assert steady_state_p0(params) == pytest.approx(float(p0), rel=1e-12)
    assert wait_probability(params) == pytest.approx(float(pw), rel=1e-12)
    assert mean_tasks(params) == pytest.approx(float(k), rel=1e-12)


def test_truncated_chain_sample():
    ref = truncated_chain(10, 1, 15)
    params = q(10, 15)
    assert steady_state_p0(params) == pytest.approx(ref["p0"], abs=1e-9)
    assert wait_probability(params) == pytest.approx(ref["p_wait"], abs=1e-9)
    assert mean_tasks(params) == pytest.approx(ref["mean_tasks"], abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(0.01, 30.0),
    m=st.integers(1, 40),
    alpha=st.floats(0.0, 1.0),
    beta=st.floats(0.0, 1.0),
    sct=st.booleans(),
)
def test_priority_ordering_and_conservation(lam, m, alpha, beta, sct):
    beta = min(beta, 1.0 - alpha)
    params = q(lam, m)
    if not params.is_stable:
        return
    mix = ClassMix(alpha, beta, sct)
    util = class_utilizations(params.utilization, mix)
    assert util.rho1 + util.rho2 == pytest.approx(params.utilization, abs=1e-12)
    assert util.rho1 >= 0 and util.rho2 >= 0
    rep = full_report(params, mix)
    assert rep.w1 <= rep.w2
    if util.rho2 > 1e-12 and rep.w1 > 0:
        assert rep.w1 < rep.w2
    assert 0 < rep.p0 <= 1
    assert 0 <= rep.p_wait < 1
    assert rep.mean_tasks >= m * params.utilization


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(0.1, 20.0), alpha=st.floats(0.0, 0.9), sct=st.booleans())
def test_delays_non_increasing_in_servers(lam, alpha, sct):
    mix = ClassMix(alpha, min(0.1, 1 - alpha), sct)
    first = math.floor(lam) + 1
    previous = None
    for m in range(first, first + 15):
        params = q(lam, m)
        if not params.is_stable:
            continue
        rep = full_report(params, mix)
        if previous is not None:
            assert rep.w1 <= previous[0] * (1 + 1e-12)
            assert rep.w2 <= previous[1] * (1 + 1e-12)
        previous = (rep.w1, rep.w2)


@pytest.mark.parametrize("m", [100, 250, 500, 2000])
def test_large_server_counts_do_not_overflow(m):
    params = q(0.99 * m, m)
    p0 = steady_state_p0(params)
    pw = wait_probability(params)
    assert 0 <= p0 <= 1 and math.isfinite(p0)
    assert 0 < pw < 1
    rep = full_report(params, TABLE1)
    assert math.isfinite(rep.w1) and math.isfinite(rep.w2)
    if m <= 500:
        _, exact_pw, _ = exact_erlang(params.arrival_rate, 1, m)
        assert pw == pytest.approx(float(exact_pw), rel=1e-9)
