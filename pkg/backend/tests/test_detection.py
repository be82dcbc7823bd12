"""
测试门控外差探测模型
"""
import math

import numpy as np
import pytest

from optostore.exceptions import (
    GateError,
    InsufficientSignalError,
    InvalidParameterError,
    UndersampledError,
)
from optostore.models.params import SAMPLE_A, SAMPLE_B
from optostore.services.detection import (
    BeatRecord,
    GateConfig,
    demodulate,
    estimate_beat,
    gated_power,
    gated_power_scan,
    synthesize_beat,
)
from optostore.services.dynamics import default_step, integrate
from optostore.services.sequence import standard_sequence

F0 = 160.0


def _tone(amplitude=2.0, frequency=F0, phase=0.3, t_end=10.0, dt=5e-4, t0=0.0):
    times = t0 + np.arange(int(round(t_end / dt)) + 1) * dt
    voltage = amplitude * np.cos(2 * math.pi * frequency * (times - t0) - phase)
    return BeatRecord(
        times=times,
        voltage=voltage,
        lo_amplitude=np.ones_like(times),
        carrier_mhz=F0,
        lo_reference=("constant",),
    )


def _wrap(phase):
    return (phase + math.pi) % (2 * math.pi) - math.pi


def _rise_time(times, power):
    peak = power.max()
    t10 = times[np.argmax(power >= 0.1 * peak)]
    t90 = times[np.argmax(power >= 0.9 * peak)]
    return t90 - t10


@pytest.fixture(scope="module")
def weak_write():
    """几乎无耦合的写入光: 腔场即裸腔响应, 本振仍开启"""
    s = standard_sequence("fig3", SAMPLE_A, {"delay_us": 1.0, "write_coupling_mhz": 0.001})
    dt = default_step(SAMPLE_A, s)
    traj = integrate(s, SAMPLE_A, (s.end_time + 20.0 / SAMPLE_A.kappa, dt))
    return traj, synthesize_beat(traj, SAMPLE_A)


def test_pure_tone_power():
    """中心频率处纯音: 门控功率 = A^2/4"""
    rec = _tone(amplitude=2.0)
    for shape in ("single-pole", "gaussian"):
        g = GateConfig(gate_start=4.0, gate_length=1.0, rbw=1.0, center_frequency=F0, filter=shape)
        assert gated_power(rec, g) == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("shape", ["single-pole", "gaussian"])
def test_half_power_at_half_rbw(shape):
    """偏离中心 RBW/2 时功率减半 (-3 dB)"""
    rbw = 2.0
    rec = _tone(amplitude=2.0, frequency=F0 + rbw / 2)
    g = GateConfig(gate_start=4.0, gate_length=2.0, rbw=rbw, center_frequency=F0, filter=shape)
    assert gated_power(rec, g) == pytest.approx(0.5, rel=1e-2)


def test_far_tone_is_rejected():
    rec = _tone(amplitude=2.0, frequency=F0 + 50.0)
    g = GateConfig(gate_start=4.0, gate_length=1.0, rbw=1.0, center_frequency=F0)
    assert gated_power(rec, g) < 1e-3


def test_tiled_gates_sum_to_total_energy():
    times = np.arange(10001) * 1e-3
    voltage = np.exp(-((times - 5.0) ** 2)) * np.cos(2 * math.pi * F0 * times)
    rec = BeatRecord(times, voltage, np.ones_like(times), F0, ("constant",))
    g = GateConfig(gate_start=0.0, gate_length=0.5, rbw=50.0)
    starts, powers = gated_power_scan(rec, g, step=0.5)
    assert len(starts) == 20
    total = np.sum(np.abs(demodulate(rec, F0, 50.0)[:10000]) ** 2 / 4.0) * rec.dt
    assert np.sum(powers) * 0.5 == pytest.approx(total, rel=1e-9)


def test_time_shift_invariance():
    rec = _tone(t_end=6.0)
    shifted = _tone(t_end=6.0, t0=1.0)
    g = GateConfig(gate_start=3.0, gate_length=0.5, rbw=3.0, center_frequency=F0)
    g_shifted = GateConfig(gate_start=4.0, gate_length=0.5, rbw=3.0, center_frequency=F0)
    assert gated_power(shifted, g_shifted) == pytest.approx(gated_power(rec, g), rel=1e-9)


def test_gate_outside_record():
    rec = _tone(t_end=1.0)
    with pytest.raises(GateError):
        gated_power(rec, GateConfig(gate_start=5.0, gate_length=1.0, rbw=1.0))
    with pytest.raises(GateError):
        rec.window(2.0, 3.0)
    with pytest.raises(InvalidParameterError):
        GateConfig(gate_start=0.0, gate_length=0.0, rbw=1.0)
    with pytest.raises(InvalidParameterError):
        gated_power_scan(rec, GateConfig(gate_start=0.0, gate_length=0.1, rbw=1.0), step=0.0)


def test_undersampled_request(short_storage):
    params, _, traj = short_storage
    with pytest.raises(UndersampledError):
        synthesize_beat(traj, params, sample_rate_mhz=1000.0)


def test_upsampled_beat(short_storage):
    params, _, traj = short_storage
    base = synthesize_beat(traj, params)
    fine = synthesize_beat(traj, params, sample_rate_mhz=4.0 / traj.dt)
    assert len(fine.times) == (len(traj.times) - 1) * 4 + 1
    assert fine.dt == pytest.approx(traj.dt / 4)
    assert base.carrier_mhz == pytest.approx(F0)
    scale = np.max(np.abs(base.voltage))
    np.testing.assert_allclose(fine.voltage[::4], base.voltage, atol=1e-9 * scale)


def test_beat_follows_local_oscillator(short_storage):
    """暗区本振关闭, 拍频电压为零"""
    params, s, traj = short_storage
    rec = synthesize_beat(traj, params, lo_amp=2.0)
    assert rec.lo_reference == ("writing", "readout")
    dark = (rec.times > s.writing.envelope.support[1]) & (rec.times < s.readout.envelope.support[0])
    assert np.all(rec.voltage[dark] == 0.0)
    assert rec.lo_amplitude.max() == pytest.approx(2.0)


def test_wide_rbw_recovers_emitted_power(weak_write):
    """RBW -> inf: 门控功率 = lo^2 kappa_ext |alpha|^2"""
    traj, rec = weak_write
    g = GateConfig(gate_start=0.6, gate_length=0.2, rbw=1e4)
    i0, i1 = traj.index(0.6), traj.index(0.8)
    expected = float(np.mean(traj.emitted_power[i0:i1]))
    assert gated_power(rec, g) == pytest.approx(expected, rel=1e-2)


def test_narrow_gate_distorts_rise(weak_write):
    """窄 RBW 与长门控使上升沿变慢; 宽 RBW 与短门控收敛到真实功率"""
    traj, rec = weak_write
    window = (traj.times >= 0.0) & (traj.times <= 1.1)
    true_peak = traj.emitted_power[window].max()

    slow_t, slow_p = gated_power_scan(rec, GateConfig(gate_start=0.0, gate_length=0.3, rbw=10.0), 0.01)
    fast_t, fast_p = gated_power_scan(
        rec, GateConfig(gate_start=0.0, gate_length=2 * traj.dt, rbw=1e4), 0.002
    )
    slow = slow_t <= 1.1
    fast = fast_t <= 1.1
    assert fast_p[fast].max() == pytest.approx(true_peak, rel=0.05)
    assert _rise_time(slow_t[slow], slow_p[slow]) > _rise_time(fast_t[fast], fast_p[fast]) + 0.08


def test_estimate_beat_on_pure_tone():
    rec = _tone(amplitude=1.5, phase=0.7, t_end=2.0)
    est = estimate_beat(rec, (0.5, 1.5))
    assert est.frequency == pytest.approx(F0, rel=1e-6)
    assert _wrap(est.phase - 0.7) == pytest.approx(0.0, abs=1e-6)
    assert est.amplitude == pytest.approx(1.5, rel=1e-4)


def test_estimate_beat_needs_five_periods():
    rec = _tone(t_end=1.0)
    with pytest.raises(InvalidParameterError):
        estimate_beat(rec, (0.5, 0.52))


def test_estimate_beat_without_signal():
    rec = _tone(amplitude=0.0, t_end=1.0)
    with pytest.raises(InsufficientSignalError):
        estimate_beat(rec, (0.1, 0.9))


@pytest.fixture(scope="module")
def readouts(short_storage):
    """两种样品的读出: 样品 B 用 fig4 时序, 样品 A 用 fig3 (1 us 延迟)"""
    s_b = standard_sequence("fig4", SAMPLE_B)
    t0 = s_b.readout.envelope.t_start
    grid_b = (t0 + 2.5, default_step(SAMPLE_B, s_b))
    params_a, s_a, traj_a = short_storage
    return {
        "sample-b": (SAMPLE_B, s_b, grid_b, integrate(s_b, SAMPLE_B, grid_b), (t0 + 0.1, t0 + 2.0)),
        "sample-a": (
            params_a,
            s_a,
            (traj_a.times[-1], traj_a.dt),
            traj_a,
            (s_a.readout.envelope.t_start + 0.1, s_a.readout.envelope.t_end - 0.1),
        ),
    }


@pytest.mark.parametrize("label", ["sample-b", "sample-a"])
@pytest.mark.parametrize("theta", [math.pi / 4, math.pi / 2, math.pi])
def test_input_phase_shifts_retrieved_beat(readouts, label, theta):
    """输入相位 theta 使读出拍频相位平移 theta (误差 < 1e-3 rad)"""
    params, s, grid, traj, window = readouts[label]
    shifted = integrate(s.with_signal(phase=theta), params, grid)
    ref = estimate_beat(synthesize_beat(traj, params), window)
    moved = estimate_beat(synthesize_beat(shifted, params), window)
    assert _wrap(moved.phase - ref.phase - theta) == pytest.approx(0.0, abs=1e-3)
    assert moved.frequency == pytest.approx(ref.frequency, rel=1e-7)
    assert moved.amplitude == pytest.approx(ref.amplitude, rel=1e-3)


def test_sample_b_beat_is_reproducible(readouts):
    """样品 B 读出拍频 160.9 MHz, 重复运行相位一致"""
    params, s, grid, traj, window = readouts["sample-b"]
    first = estimate_beat(synthesize_beat(traj, params), window)
    again = estimate_beat(synthesize_beat(integrate(s, params, grid), params), window)
    assert first.frequency == pytest.approx(160.9, abs=1.0 / (window[1] - window[0]))
    assert first.phase == again.phase
    assert first.amplitude > 0
