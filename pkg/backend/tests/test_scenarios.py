"""
测试实验场景: 光存储, 存储寿命, 读出脉冲, OMIT 与存储谱, 协同度拟合
"""
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from optostore.exceptions import FitError, InvalidParameterError, InvalidSequenceError
from optostore.models.params import cooperativity, coupling_from_cooperativity, get_preset
from optostore.services.analytic import omit_dip_width
from optostore.services.detection import GateConfig
from optostore.services.scenarios import (
    Spectrum,
    default_detuning_grid,
    fit_cooperativity,
    measure_dip,
    measure_peak,
    retrieval_window,
    run_light_storage,
    run_omit_sweep,
    run_readout_series,
    run_storage_sweep,
    storage_energy_vs_delay,
    synthetic_omit_spectrum,
)
from optostore.services.sequence import standard_sequence
from optostore.utils.units import angular_to_mhz, mhz_to_angular

# 控制光足够长, 门控远晚于机械瞬态
STEADY_DT = 2.5e-4
STEADY_WRITE_US = 25.5
STEADY_GATE = GateConfig(gate_start=24.2, gate_length=1.0, rbw=1.0)


def _omit_grid(params, C, dense_points=41):
    width = omit_dip_width(C, params.gamma_m)
    dense = np.linspace(-3 * width, 3 * width, dense_points)
    off = params.kappa * np.array([0.5, 1.0, 1.5])
    return np.unique(np.concatenate([dense, off, -off]))


# ============ Light storage ============
def test_storage_ratio_sample_a(sample_a):
    """8 us 存储: 声子数之比 exp(-gamma_m (8 - 2*edge)) ~ 0.522"""
    s = standard_sequence("fig3", sample_a)
    gate = GateConfig(gate_start=0.0, gate_length=0.1, rbw=30.0)
    result = run_light_storage(sample_a, s, gate)
    assert result.storage_ratio == pytest.approx(math.exp(-sample_a.gamma_m * 7.96), rel=5e-3)
    assert result.storage_ratio == pytest.approx(0.520, rel=5e-3)
    assert 0.0 < result.efficiency < 1.0
    # 余弦边沿使 |A_in|^2 的积分比 peak^2 * duration 少 0.5 * edge
    env = s.signal.envelope
    t = np.linspace(*env.support, 200001)
    expected = trapezoid(env.values(t) ** 2, t)
    assert result.input_photons == pytest.approx(expected, rel=1e-4)
    assert result.input_photons == pytest.approx(4.027e8 * (1 - 0.5 * 0.02), rel=2e-3)
    assert result.scan_times[0] == 0.0
    assert np.all(np.diff(result.scan_times) > 0)


def test_light_storage_needs_readout(sample_a):
    s = standard_sequence("fig5-omit", sample_a)
    with pytest.raises(InvalidSequenceError):
        run_light_storage(sample_a, s, GateConfig(gate_start=0.0, gate_length=0.1, rbw=30.0))
    with pytest.raises(InvalidSequenceError):
        retrieval_window(s, sample_a)


@pytest.mark.parametrize("label", ["sample-a", "sample-b"])
def test_storage_delay_fit(label):
    """取回能量随延迟指数衰减, 两种样品的拟合速率都等于 gamma_m (< 1%)"""
    params = get_preset(label)
    s = standard_sequence("fig3", params)
    delays = [0.0, 8.0, 16.0, 24.0, 32.0]
    series = storage_energy_vs_delay(params, s, delays)
    assert np.all(np.diff(series.energies) < 0)
    assert series.fitted_rate == pytest.approx(params.gamma_m, rel=1e-2)
    np.testing.assert_array_equal(series.effective_delays[1:], delays[1:])


def test_storage_delay_without_damping(sample_a):
    """gamma_m = 0: 取回能量与延迟无关"""
    params = sample_a.with_overrides(gamma_m=0.0)
    s = standard_sequence("fig3", params)
    series = storage_energy_vs_delay(params, s, [0.0, 8.0, 16.0])
    np.testing.assert_allclose(series.energies, series.energies[0], rtol=1e-3)
    assert series.fitted_rate == pytest.approx(0.0, abs=1e-4)


def test_storage_delay_clamp(sample_a):
    s = standard_sequence("fig3", sample_a)
    series = storage_energy_vs_delay(sample_a, s, [0.0, 0.3])
    floor = 2 * 0.02 + 20.0 / sample_a.kappa
    np.testing.assert_allclose(series.effective_delays, [floor, floor])
    np.testing.assert_array_equal(series.delays, [0.0, 0.3])
    assert series.energies[0] == series.energies[1]
    with pytest.raises(InvalidParameterError):
        storage_energy_vs_delay(sample_a, s, [-1.0])


# ============ Readout pulse shaping ============
def test_readout_series_rates(sample_b):
    """读出包络衰减速率与绝热估计相差 < 10%, 且随 G 单调增加"""
    couplings = [mhz_to_angular(g) for g in (0.2, 0.45, 0.6)]
    results = run_readout_series(sample_b, couplings)
    rates = [r.decay_rate for r in results]
    for r in results:
        assert r.retrieved
        assert r.decay_rate == pytest.approx(r.analytic_rate, rel=0.1)
    assert rates[0] < rates[1] < rates[2]
    assert rates[0] == pytest.approx(0.3267, rel=0.1)
    assert results[0].one_over_e_time == pytest.approx(1.0 / rates[0])


def test_readout_without_coupling(sample_b):
    results = run_readout_series(sample_b, [0.0])
    assert not results[0].retrieved
    assert math.isnan(results[0].decay_rate)


# ============ Spectra ============
@pytest.mark.parametrize("C", [0.301, 1.0])
def test_omit_dip_width(sample_b, C):
    """稳态 OMIT 凹陷宽度 = (1+C) gamma_m, 误差 < 5%"""
    G = coupling_from_cooperativity(C, sample_b.gamma_m, sample_b.kappa)
    s = standard_sequence("fig5-omit", sample_b, {"write_duration_us": STEADY_WRITE_US})
    detunings = _omit_grid(sample_b, C)
    spectrum = run_omit_sweep(sample_b, G, detunings, STEADY_GATE, s, dt=STEADY_DT)
    assert spectrum.steady_state
    dip = measure_dip(spectrum, sample_b)
    expected = angular_to_mhz(omit_dip_width(C, sample_b.gamma_m))
    assert dip.width == pytest.approx(expected, rel=0.05)
    assert dip.position == pytest.approx(160.9, abs=1e-9)
    assert dip.ratio == pytest.approx(1.0 / (1.0 + C) ** 2, rel=0.05)

    fit = fit_cooperativity(spectrum, sample_b)
    assert fit.cooperativity == pytest.approx(C, rel=0.05)


def test_sweep_is_thread_independent(sample_b, caplog):
    """线程数不改变结果 (逐位一致)"""
    G = mhz_to_angular(0.38)
    s = standard_sequence("fig5-omit", sample_b, {"write_duration_us": 2.0})
    gate = GateConfig(gate_start=1.0, gate_length=0.5, rbw=1.0)
    detunings = np.linspace(-2 * sample_b.kappa, 2 * sample_b.kappa, 70)
    serial = run_omit_sweep(sample_b, G, detunings, gate, s, dt=STEADY_DT, threads=1)
    threaded = run_omit_sweep(sample_b, G, detunings, gate, s, dt=STEADY_DT, threads=3)
    np.testing.assert_array_equal(serial.powers, threaded.powers)
    assert not serial.steady_state
    assert "steady state" in caplog.text


def test_default_gate_reports_residual_transient(sample_b, caplog):
    """默认门 (控制光开启后 6.5 us) 仍残留 ~8% 瞬态振幅, 标记为非稳态"""
    G = mhz_to_angular(0.38)
    s = standard_sequence("fig5-omit", sample_b)
    detunings = np.array([-0.5, 0.0, 0.5]) * sample_b.kappa
    spectrum = run_omit_sweep(sample_b, G, detunings, sequence=s, dt=STEADY_DT)
    gamma_eff = omit_dip_width(cooperativity(G, sample_b.gamma_m, sample_b.kappa), sample_b.gamma_m)
    assert spectrum.transient_ratio == pytest.approx(math.exp(-0.5 * gamma_eff * 6.5), rel=1e-9)
    assert spectrum.transient_ratio == pytest.approx(0.078, abs=2e-3)
    assert not spectrum.steady_state
    assert "transient amplitude" in caplog.text


def test_storage_and_omit_share_center(sample_b):
    """存储峰与 OMIT 凹陷都位于 omega_m/2pi, 远失谐信号不被存储"""
    G = mhz_to_angular(0.38)
    C = 4 * G * G / (sample_b.gamma_m * sample_b.kappa)
    grid = np.unique(np.concatenate([_omit_grid(sample_b, C, 21), 3 * sample_b.kappa * np.array([-1.0, 1.0])]))

    storage = run_storage_sweep(sample_b, detunings=grid, dt=STEADY_DT)
    omit = run_omit_sweep(sample_b, G, grid, dt=STEADY_DT)
    peak = measure_peak(storage)
    dip = measure_dip(omit, sample_b)
    step = angular_to_mhz(6 * omit_dip_width(C, sample_b.gamma_m) / 20)
    assert peak.position == pytest.approx(160.9, abs=step)
    assert dip.position == pytest.approx(160.9, abs=step)
    assert storage.powers[0] < 0.01 * peak.ratio
    assert storage.powers[-1] < 0.01 * peak.ratio
    assert storage.kind == "storage" and omit.kind == "omit"


def test_short_write_broadens_storage_response(sample_b):
    """1 us 写入脉冲的存储谱比 8 us 写入更宽"""
    dense = mhz_to_angular(np.linspace(-0.5, 0.5, 21))
    coarse = mhz_to_angular(np.linspace(-3.0, 3.0, 25))
    grid = np.unique(np.concatenate([dense, coarse]))
    long_write = run_storage_sweep(sample_b, detunings=grid, dt=STEADY_DT)
    short_seq = standard_sequence("fig5-storage", sample_b, {"write_duration_us": 1.0})
    short_write = run_storage_sweep(sample_b, short_seq, detunings=grid, dt=STEADY_DT)
    assert measure_peak(short_write).width > 2 * measure_peak(long_write).width


# ============ Closed-form spectra and the fit ============
@pytest.mark.parametrize("C", [0.1, 0.301, 1.0, 10.0, 30.4])
def test_fit_recovers_cooperativity(sample_b, C):
    spectrum = synthetic_omit_spectrum(sample_b, C)
    fit = fit_cooperativity(spectrum, sample_b)
    assert fit.cooperativity == pytest.approx(C, rel=1e-3)
    assert fit.residual_norm < 1e-4
    assert fit.iterations > 141
    report = fit.report()
    assert report["cooperativity_ratio"] == fit.cooperativity
    assert report["coupling_mhz"] == pytest.approx(angular_to_mhz(fit.coupling))


def test_fit_without_coupling(sample_b):
    spectrum = synthetic_omit_spectrum(sample_b, 0.0, default_detuning_grid(sample_b, mhz_to_angular(0.38)))
    fit = fit_cooperativity(spectrum, sample_b)
    assert fit.cooperativity == pytest.approx(0.0, abs=1e-5)


def test_fit_errors(sample_b):
    spectrum = synthetic_omit_spectrum(sample_b, 50.0)
    with pytest.raises(FitError):
        fit_cooperativity(spectrum, sample_b, bracket=(0.0, 10.0))
    dark = Spectrum(
        detunings=spectrum.detunings, powers=np.zeros_like(spectrum.powers), kind="omit",
        drive_detuning=spectrum.drive_detuning,
    )
    with pytest.raises(FitError):
        fit_cooperativity(dark, sample_b)
    with pytest.raises(InvalidParameterError):
        fit_cooperativity(spectrum, sample_b.with_overrides(gamma_m=0.0))


def test_measure_dip_on_closed_form(sample_b):
    spectrum = synthetic_omit_spectrum(sample_b, 1.0)
    dip = measure_dip(spectrum, sample_b)
    assert dip.position == pytest.approx(angular_to_mhz(sample_b.omega_m), abs=1e-9)
    assert dip.ratio == pytest.approx(0.25, rel=1e-2)
    assert dip.width == pytest.approx(angular_to_mhz(2 * sample_b.gamma_m), rel=2e-2)


def test_spectrum_validation():
    with pytest.raises(InvalidParameterError):
        Spectrum(detunings=np.array([1.0, 0.5]), powers=np.ones(2), kind="omit", drive_detuning=0.0)
    with pytest.raises(InvalidParameterError):
        Spectrum(detunings=np.array([0.5, 1.0]), powers=np.ones(2), kind="comb", drive_detuning=0.0)


def test_default_grid_resolves_dip(sample_b):
    G = mhz_to_angular(0.38)
    grid = default_detuning_grid(sample_b, G)
    assert np.all(np.diff(grid) > 0)
    assert grid[0] == pytest.approx(-3 * sample_b.kappa)
    assert np.sum(np.abs(grid) < omit_dip_width(0.301, sample_b.gamma_m)) >= 10
