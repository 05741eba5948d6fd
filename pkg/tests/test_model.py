import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogslm.config import ParameterSet
from fogslm.model import (
    Allocation,
    LayerParams,
    LinkParams,
    ModelDomainError,
    Solution,
    calibrate_a,
    comm_time,
    evaluate,
    evaluate_powers,
    frequency_at,
    latency_key,
    link_rate,
    proc_time,
    snr_to_power,
)

LINK = LinkParams(5e8, 1e-10, 1.0)


# -- frozen reference values (hand-evaluated closed forms) --------------------

def test_calibrate_a_iot_point():
    assert calibrate_a(2.2, 4e8, 1e-3, 3) == pytest.approx(3.4359375e-26, rel=1e-12)


def test_calibrate_a_fog_and_cloud_points():
    assert calibrate_a(90, 2.4e9, 1e-3, 3) == pytest.approx(6.510344328703704e-27, rel=1e-12)
    assert calibrate_a(105, 3.6e9, 1e-3, 3) == pytest.approx(2.2504929698216735e-27, rel=1e-12)


def test_cloud_processes_its_clock_rate_in_one_second(instance):
    assert proc_time(3.6e9, 105.0, instance.cloud) == pytest.approx(1.0, rel=1e-12)


def test_link_rate_at_32_db():
    assert link_rate(10 ** 3.2 * 0.05, LINK) == pytest.approx(5315539947.809286, rel=1e-12)
    assert link_rate(10 ** 3.2 * 0.05, LINK) == pytest.approx(5.31e9, abs=0.01e9)


def test_snr_to_power_reference_points():
    assert snr_to_power(0.0, LINK) == pytest.approx(0.05, rel=1e-15)
    assert snr_to_power(5.0, LINK) == pytest.approx(0.158113883008419, rel=1e-12)
    assert snr_to_power(32.0, LINK) == pytest.approx(79.24465962305571, rel=1e-12)


def test_evaluate_matches_hand_coded_evaluator(instance):
    B = instance.workload_bits
    res = evaluate(instance, Allocation(B / 2, B / 4, 0.5, 0.5))
    assert res.T_I == pytest.approx(0.01901740477639481, rel=1e-12)
    assert res.T_F == pytest.approx(0.0010048498292129547, rel=1e-12)
    assert res.T_C == pytest.approx(0.0008523448167688891, rel=1e-12)
    assert res.T == res.T_I


# -- trivial cases ------------------------------------------------------------

def test_everything_at_fog(instance):
    B = instance.workload_bits
    res = evaluate(instance, Allocation(B, 0.0, 0.5, 0.3))
    assert res.T_I == 0.0
    assert res.T_C == res.t_comm_if
    assert res.T == res.T_F


def test_everything_at_iot(instance):
    B = instance.workload_bits
    res = evaluate(instance, Allocation(0.0, 0.0, 0.4, 0.0))
    assert res.T == res.T_I == proc_time(B, 0.6 * instance.iot.p_total, instance.iot)
    assert res.T_F == res.T_C == 0.0


def test_zero_bits_need_no_power(instance):
    assert proc_time(0, 0.0, instance.iot) == 0.0
    assert np.all(proc_time(np.zeros(3), 0.0, instance.iot) == 0.0)


def test_comm_time_corners():
    assert comm_time(0, 0.0) == 0.0
    assert comm_time(5, 0.0) == math.inf
    np.testing.assert_array_equal(comm_time(np.array([0.0, 1.0]), 0.0), [0.0, math.inf])
    assert comm_time(10, 5.0) == 2.0


def test_power_at_idle_is_a_domain_error(instance):
    with pytest.raises(ModelDomainError):
        proc_time(10, instance.iot.b, instance.iot)
    B = instance.workload_bits
    with pytest.raises(ModelDomainError):
        evaluate(instance, Allocation(B / 2, 0.0, 1.0, 0.0))


def test_dead_link_is_unbounded_not_inf(instance):
    B = instance.workload_bits
    res = evaluate(instance, Allocation(B / 2, 0.0, 0.0, 0.0))
    assert not res.bounded
    res = evaluate(instance, Allocation(B / 2, B / 4, 0.5, 0.0))
    assert not res.bounded
    ok = evaluate(instance, Allocation(0.0, 0.0, 0.0, 0.0))
    assert latency_key(ok) < latency_key(res)


@pytest.mark.parametrize("m,k,alpha,gamma", [
    (1.0, 2.0, 0.1, 0.1), (-1.0, 0.0, 0.1, 0.1), (1.0, 0.0, -0.1, 0.1), (1.0, 0.0, 0.1, 1.5),
])
def test_allocation_invariants(m, k, alpha, gamma):
    with pytest.raises(ValueError):
        Allocation(m, k, alpha, gamma)


def test_allocation_beyond_workload(instance):
    with pytest.raises(ValueError):
        evaluate(instance, Allocation(2 * instance.workload_bits, 0.0, 0.5, 0.0))


def test_solution_allocation_clamps_drift():
    sol = Solution(1.0, 10.0, 10.0 + 1e-12, 1.0 + 1e-15, 0.2)
    alloc = sol.allocation
    assert alloc.k == alloc.m and alloc.alpha == 1.0


@pytest.mark.parametrize("kwargs", [
    dict(a=0.0, b=0.0, c=1.0, beta=3.0, p_total=1.0),
    dict(a=1.0, b=-1.0, c=1.0, beta=3.0, p_total=1.0),
    dict(a=1.0, b=0.0, c=0.0, beta=3.0, p_total=1.0),
    dict(a=1.0, b=0.0, c=1.0, beta=0.5, p_total=1.0),
    dict(a=1.0, b=2.0, c=1.0, beta=3.0, p_total=1.0),
])
def test_layer_validation(kwargs):
    with pytest.raises(ValueError):
        LayerParams(**kwargs)


def test_link_validation():
    with pytest.raises(ValueError):
        LinkParams(0.0, 1e-10, 1.0)
    with pytest.raises(ValueError):
        LinkParams(1.0, 1e-10, -1.0)
    with pytest.raises(ValueError):
        link_rate(-1.0, LINK)
    with pytest.raises(ValueError):
        snr_to_power(math.inf, LINK)


def test_alpha_max_matches_idle_share(instance):
    assert instance.alpha_max == pytest.approx(1 - 1e-3 / instance.iot.p_total)
    assert instance.with_workload(5.0).workload_bits == 5.0


# -- properties ---------------------------------------------------------------

bits = st.floats(0.0, 1e9)


@given(max_p=st.floats(0.01, 500), max_f=st.floats(1e6, 1e10), beta=st.floats(1.0, 4.0))
def test_calibration_round_trip(max_p, max_f, beta):
    b = 1e-3
    if max_p <= 2 * b:
        return
    a = calibrate_a(max_p, max_f, b, beta)
    layer = LayerParams(a=a, b=b, c=1.0, beta=beta, p_total=max_p)
    assert frequency_at(max_p, layer) == pytest.approx(max_f, rel=1e-9)


@given(n1=bits, n2=bits, power=st.floats(0.01, 100))
def test_proc_time_is_additive(instance, n1, n2, power):
    layer = instance.fog
    lhs = proc_time(n1 + n2, power, layer)
    rhs = proc_time(n1, power, layer) + proc_time(n2, power, layer)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@given(snr=st.floats(-30, 60))
def test_snr_round_trip(snr):
    p = snr_to_power(snr, LINK)
    back = 10 * math.log10(p / LINK.noise_power)
    assert back == pytest.approx(snr, rel=1e-12, abs=1e-12)


@given(mf=st.floats(0, 1), kf=st.floats(0, 1), alpha=st.floats(0.01, 0.99),
       gamma=st.floats(0.01, 0.99))
@settings(max_examples=200)
def test_breakdown_consistency(instance, mf, kf, alpha, gamma):
    B = instance.workload_bits
    m = mf * B
    res = evaluate(instance, Allocation(m, kf * m, alpha, gamma))
    assert res.T == max(res.T_I, res.T_F, res.T_C)
    assert res.T_F == res.t_comm_if + res.t_proc_fog
    assert res.T_C == res.t_comm_if + res.t_comm_fc + res.t_proc_cloud
    assert all(math.isfinite(v) for v in (res.T_I, res.T_F, res.T_C))


@given(scale=st.floats(0.01, 100), mf=st.floats(0, 1), kf=st.floats(0, 1))
def test_latency_is_homogeneous_in_workload(scale, mf, kf):
    inst = ParameterSet().build()
    B = inst.workload_bits
    alloc = Allocation(mf * B, kf * mf * B, 0.6, 0.4)
    big = inst.with_workload(scale * B)
    scaled = Allocation(scale * alloc.m, min(scale * alloc.k, scale * alloc.m), 0.6, 0.4)
    assert evaluate(big, scaled).T == pytest.approx(scale * evaluate(inst, alloc).T, rel=1e-9)


@given(mf=st.floats(0.01, 0.99), kf=st.floats(0.01, 0.99), alpha=st.floats(0.05, 0.95),
       gamma=st.floats(0.05, 0.95), key=st.sampled_from(
           ["proc_iot", "comm_iot", "proc_fog", "comm_fog", "proc_cloud"]))
@settings(max_examples=200)
def test_more_power_strictly_helps_the_layers_it_feeds(mf, kf, alpha, gamma, key):
    inst = ParameterSet().build()
    B = inst.workload_bits
    m, k = mf * B, kf * mf * B
    powers = Allocation(m, k, alpha, gamma).powers(inst)
    raised = dict(powers, **{key: powers[key] * 1.01})
    before = evaluate_powers(inst, m, k, powers)
    after = evaluate_powers(inst, m, k, raised)
    layers = {"proc_iot": ("T_I",), "comm_iot": ("T_F", "T_C"), "proc_fog": ("T_F",),
              "comm_fog": ("T_C",), "proc_cloud": ("T_C",)}[key]
    for name in layers:
        assert getattr(after, name) < getattr(before, name)
