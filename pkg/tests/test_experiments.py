import dataclasses
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogslm.config import ParameterSet
from fogslm.experiments import (
    ARCHITECTURES,
    CLOUD_ONLY,
    CSV_COLUMNS,
    FIG3_WORKLOADS,
    FIG4_SNRS_DB,
    FOG_ONLY,
    THREE_LAYER,
    ExperimentConfig,
    average_latency,
    baseline_latency,
    cloud_only,
    figure_configs,
    fog_only,
    linear_fit,
    point_gains,
    random_instance,
    realization_rng,
    rounding_loss,
    run_sweep,
    sample_gain,
    threshold_crossing,
)
from fogslm.model import link_rate, proc_time
from fogslm.oracle import grid_oracle
from fogslm.slm import slm_run


def _csv(result):
    buf = io.StringIO()
    result.write_csv(buf)
    return buf.getvalue()


def _small(**kw):
    base = dict(sweep_values=(2e5, 6e5), n_realizations=12, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_gain_is_unit_mean_exponential():
    x = sample_gain(np.random.default_rng(0), 200_000)
    assert x.min() >= 0
    assert x.mean() == pytest.approx(1.0, abs=0.01)
    assert np.mean(x > 1.0) == pytest.approx(np.exp(-1), abs=0.005)


def test_substreams_are_deterministic_and_distinct():
    a = realization_rng(42, 0, 0).random()
    assert a == realization_rng(42, 0, 0).random()
    assert a != realization_rng(42, 0, 1).random()
    assert a != realization_rng(42, 1, 0).random()
    assert a != realization_rng(43, 0, 0).random()


def test_mean_channel_uses_one_unit_gain():
    cfg = _small(channel="mean")
    assert cfg.effective_realizations == 1
    np.testing.assert_array_equal(point_gains(cfg, 0), [1.0])


def test_same_seed_same_csv():
    assert _csv(run_sweep(_small())) == _csv(run_sweep(_small()))
    assert _csv(run_sweep(_small())) != _csv(run_sweep(_small(seed=4)))


def test_parallel_matches_serial():
    cfg = _small(architectures=ARCHITECTURES)
    assert _csv(run_sweep(cfg)) == _csv(run_sweep(dataclasses.replace(cfg, workers=2)))


def test_single_point_sweep_equals_average_latency():
    cfg = _small(sweep_values=(5e5,))
    assert run_sweep(cfg).points[0].rows == average_latency(cfg, 0).rows


def test_csv_schema():
    text = _csv(run_sweep(_small(architectures=ARCHITECTURES))).splitlines()
    assert text[0].split(",") == list(CSV_COLUMNS)
    assert len(text) == 1 + 2 * 3


def test_both_solvers_report_gap():
    res = run_sweep(_small(solver="both", n_realizations=4))
    labels = {r.solver for r in res.rows}
    assert labels == {"slm", "oracle"}
    for p in res.points:
        assert p.gap_max is not None and p.gap_max <= 0.05


def test_series_and_missing_series():
    res = run_sweep(_small())
    x, y, e = res.series(THREE_LAYER)
    np.testing.assert_array_equal(x, [2e5, 6e5])
    assert np.all(y > 0) and np.all(e >= 0)
    with pytest.raises(KeyError):
        res.series(FOG_ONLY)


@pytest.mark.parametrize("kwargs", [
    dict(sweep_axis="gain"), dict(sweep_values=()), dict(sweep_values=(2.0, 1.0)),
    dict(n_realizations=0), dict(solver="x"), dict(channel="x"),
    dict(architectures=("mesh",)), dict(workers=-1),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_fog_only_fixed_value(instance):
    B = instance.workload_bits
    res = fog_only(instance)
    rate = link_rate(instance.iot.p_total, instance.link_if)
    expected = B / rate + proc_time(B, instance.fog.p_total, instance.fog)
    assert res.T == pytest.approx(expected, rel=1e-12)
    assert res.T_I == 0.0


def test_cloud_only_fixed_value(instance):
    B = instance.workload_bits
    res = cloud_only(instance)
    expected = (B / link_rate(instance.iot.p_total, instance.link_if)
                + B / link_rate(instance.fog.p_total, instance.link_fc)
                + proc_time(B, instance.cloud.p_total, instance.cloud))
    assert res.T == pytest.approx(expected, rel=1e-12)


def test_optimized_baselines_keep_some_work_local(instance):
    for arch in (FOG_ONLY, CLOUD_ONLY):
        res = baseline_latency(arch, instance, optimize_power=True)
        assert res.bounded and res.T_I > 0
        assert res.T >= grid_oracle(instance).t * (1 - 1e-9)


def test_dead_link_baselines_are_unbounded(params):
    inst = params.build(gain_if=0.0)
    assert not fog_only(inst).bounded
    assert not cloud_only(inst).bounded


def test_unbounded_realizations_are_counted(params):
    cfg = ExperimentConfig(params=params.replace(gain_fc=0.0), architectures=(CLOUD_ONLY,),
                           n_realizations=5)
    row = average_latency(cfg, 0).rows[0]
    assert row.n_valid == 0 and row.n_unbounded == 5 and row.unreliable


def test_rounding_loss_is_tiny(instance):
    sol, _ = slm_run(instance)
    loss = rounding_loss(instance, sol)
    assert 0 <= loss.relative_increase < 1e-4
    assert loss.k <= loss.m <= instance.workload_bits


def test_threshold_crossing():
    x = [0.0, 1.0, 2.0]
    assert threshold_crossing(x, [3.0, 1.0, 0.0], 2.0) == pytest.approx(0.5)
    assert threshold_crossing(x, [0.0, 1.0, 3.0], 2.0) == pytest.approx(1.5)
    assert threshold_crossing(x, [3.0, 2.0, 1.0], 2.0) == 1.0
    assert threshold_crossing(x, [5.0, 4.0, 3.0], 2.0) is None


def test_linear_fit_exact_line():
    slope, intercept, r2 = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert (slope, intercept, r2) == pytest.approx((2.0, 1.0, 1.0))


def test_figure_presets():
    fig3 = figure_configs("fig3")
    assert sorted(fig3) == ["fig3_snr10", "fig3_snr2", "fig3_snr5"]
    cfg = fig3["fig3_snr5"]
    assert cfg.params.snr_if_db == 5.0 and cfg.sweep_values == FIG3_WORKLOADS
    assert cfg.n_realizations == 4000 and cfg.channel == "rayleigh"
    fig4 = figure_configs("fig4")["fig4"]
    assert fig4.sweep_axis == "snr" and fig4.sweep_values == FIG4_SNRS_DB
    assert fig4.params.workload_bits == 1e6 and fig4.architectures == ARCHITECTURES
    assert fig4.channel == "rayleigh"
    assert figure_configs("fig4", channel="mean")["fig4"].channel == "mean"
    with pytest.raises(ValueError):
        figure_configs("fig5")


def test_latency_falls_with_snr():
    cfg = ExperimentConfig(sweep_axis="snr", sweep_values=(0.0, 4.0, 8.0, 12.0),
                           n_realizations=200, seed=9)
    _, y, e = run_sweep(cfg).series(THREE_LAYER)
    for i in range(len(y) - 1):
        assert y[i + 1] <= y[i] + 2 * np.hypot(e[i], e[i + 1])


def test_latency_grows_linearly_at_mean_channel():
    cfg = ExperimentConfig(params=ParameterSet(snr_if_db=5.0), sweep_values=FIG3_WORKLOADS,
                           channel="mean")
    x, y, _ = run_sweep(cfg).series(THREE_LAYER)
    assert linear_fit(x, y)[2] > 0.9999


@given(seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_random_instance_ranges(seed):
    inst = random_instance(np.random.default_rng(seed))
    assert 1e5 <= inst.workload_bits <= 2e6
    assert 0.1 <= inst.link_if.gain <= 4 and 0.1 <= inst.link_fc.gain <= 4
    snr = 10 * np.log10(inst.iot.p_total / inst.link_if.noise_power)
    assert 2 - 1e-9 <= snr <= 10 + 1e-9


@given(seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_three_layer_dominates_baselines(seed):
    rng = np.random.default_rng(seed)
    inst = ParameterSet().build(gain_if=float(sample_gain(rng)),
                                snr_if_db=float(rng.uniform(0, 20)))
    best, _ = slm_run(inst)
    for arch in (FOG_ONLY, CLOUD_ONLY):
        res = baseline_latency(arch, inst)
        if res.bounded:
            assert best.t <= res.T * (1 + 0.01)


@given(seed=st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_rounding_never_costs_much(seed):
    inst = random_instance(np.random.default_rng(seed))
    loss = rounding_loss(inst, slm_run(inst)[0])
    assert loss.relative_increase < 1e-4
