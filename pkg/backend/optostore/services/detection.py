"""
Gated-heterodyne detection model.

The drive pulse acts as local oscillator; the cavity emission beats against it at the
signal-minus-drive frequency (omega_m for a red-sideband drive). A spectrum analyzer in
gated mode demodulates at its center frequency, low-pass filters with the resolution
bandwidth (RBW) and averages the power over the gate.
"""
from dataclasses import dataclass
import logging
import math
from typing import Literal

import numpy as np
from lmfit import Model
from scipy.ndimage import gaussian_filter1d
from scipy.signal import hilbert, lfilter, windows

from ..exceptions import GateError, InsufficientSignalError, InvalidParameterError, UndersampledError
from ..models.params import SystemParams
from ..utils.units import TWO_PI
from .dynamics import Trajectory

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_PERIOD = 8


# ============ Domain Types ============
@dataclass(frozen=True)
class BeatRecord:
    """Sampled heterodyne voltage (arbitrary units)."""
    times: np.ndarray
    voltage: np.ndarray
    lo_amplitude: np.ndarray
    carrier_mhz: float
    lo_reference: tuple[str, ...]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def sample_rate_mhz(self) -> float:
        return 1.0 / self.dt

    def window(self, t0: float, t1: float) -> "BeatRecord":
        """Sub-record with t0 <= t <= t1."""
        i0 = max(int(math.ceil((t0 - self.times[0]) / self.dt - 1e-9)), 0)
        i1 = min(int(math.floor((t1 - self.times[0]) / self.dt + 1e-9)), len(self.times) - 1)
        if i1 <= i0:
            raise GateError(f"window [{t0}, {t1}] us does not overlap the record")
        return BeatRecord(
            times=self.times[i0 : i1 + 1],
            voltage=self.voltage[i0 : i1 + 1],
            lo_amplitude=self.lo_amplitude[i0 : i1 + 1],
            carrier_mhz=self.carrier_mhz,
            lo_reference=self.lo_reference,
        )


@dataclass(frozen=True)
class GateConfig:
    """Gated spectrum-analyzer settings. center_frequency None tracks the record carrier."""
    gate_start: float
    gate_length: float
    rbw: float
    center_frequency: float | None = None
    filter: Literal["single-pole", "gaussian"] = "single-pole"

    def __post_init__(self):
        if not self.gate_length > 0:
            raise InvalidParameterError(f"gate_length must be positive (got {self.gate_length})")
        if not self.rbw > 0:
            raise InvalidParameterError(f"rbw must be positive (got {self.rbw})")
        if self.filter not in ("single-pole", "gaussian"):
            raise InvalidParameterError(f"unknown RBW filter shape '{self.filter}'")


@dataclass(frozen=True)
class BeatEstimate:
    """Sinusoid fit V = amplitude * cos(2 pi f t - phase), phase referred to t = 0."""
    frequency: float
    phase: float
    amplitude: float
    nfev: int


# ============ Beat synthesis ============
def _lo_envelope(traj: Trajectory, times: np.ndarray) -> tuple[np.ndarray, tuple[str, ...]]:
    """Unit-peak sum of the drive envelopes: the local oscillator follows the drive."""
    sequence = traj.metadata.get("sequence")
    if sequence is None:
        return np.ones_like(times), ("constant",)
    lo = np.zeros_like(times)
    names = []
    for name, tone in sequence.tones:
        if tone.envelope.peak == 0:
            continue
        lo += tone.envelope.values(times) / tone.envelope.peak
        names.append(name)
    return lo, tuple(names)


def synthesize_beat(
    traj: Trajectory,
    p: SystemParams,
    lo_amp: float = 1.0,
    sample_rate_mhz: float | None = None,
) -> BeatRecord:
    """
    V(t) = 2 lo(t) sqrt(kappa_ext) Re[alpha(t) exp(-i Omega t)], Omega = delta - Delta.

    Sign convention: on a red-sideband drive (Delta = -omega_m, delta = 0) Omega = +omega_m, so
    V = 2 lo sqrt(kappa_ext) |alpha| cos(omega_m t - arg alpha) and the phase reported by
    `estimate_beat` is arg alpha. The conjugate form exp(+i omega_m t) gives the mirrored sign.

    The trajectory is linearly interpolated onto a finer grid when it samples the carrier
    with fewer than 8 points per period.
    """
    carrier = (traj.signal_detuning - traj.drive_detuning) / TWO_PI
    carrier_max = float(np.max(np.abs(carrier)))
    required = MIN_SAMPLES_PER_PERIOD * carrier_max
    if sample_rate_mhz is not None and sample_rate_mhz < required:
        raise UndersampledError(
            f"sample rate {sample_rate_mhz:.4g} MHz is below {required:.4g} MHz "
            f"({MIN_SAMPLES_PER_PERIOD} samples per beat period)"
        )
    native_rate = 1.0 / traj.dt
    rate = max(native_rate, sample_rate_mhz or 0.0)
    if rate < required:
        rate = required
    factor = max(1, math.ceil(rate / native_rate - 1e-9))

    if factor == 1:
        times, alpha, omega = traj.times, traj.alpha, TWO_PI * carrier
    else:
        # 细网格插值 (trajectory too coarse for the carrier)
        times = traj.times[0] + np.arange((len(traj.times) - 1) * factor + 1) * (traj.dt / factor)
        alpha = np.interp(times, traj.times, traj.alpha.real) + 1j * np.interp(
            times, traj.times, traj.alpha.imag
        )
        omega = TWO_PI * np.interp(times, traj.times, carrier)
        logger.debug(f"Beat grid upsampled x{factor} to {1.0 / (traj.dt / factor):.4g} MHz")

    lo, names = _lo_envelope(traj, times)
    lo = lo_amp * lo
    voltage = 2.0 * lo * math.sqrt(p.kappa_ext) * np.real(alpha * np.exp(-1j * omega * times))
    return BeatRecord(
        times=times,
        voltage=voltage,
        lo_amplitude=lo,
        carrier_mhz=float(np.median(carrier)),
        lo_reference=names,
    )


# ============ Spectrum-analyzer model ============
def demodulate(
    rec: BeatRecord,
    center_mhz: float | None = None,
    rbw: float | None = None,
    shape: str = "single-pole",
) -> np.ndarray:
    """
    Complex baseband of the record at center_mhz, RBW-filtered when rbw is given.

    Uses the analytic signal, so a tone A cos(2 pi f t - phi) at the center maps to
    A exp(-i phi) before filtering.
    """
    f_c = rec.carrier_mhz if center_mhz is None else center_mhz
    analytic = hilbert(rec.voltage)
    baseband = analytic * np.exp(-1j * TWO_PI * f_c * rec.times)
    if rbw is None:
        return baseband
    dt = rec.dt
    if shape == "gaussian":
        # |H(f)|^2 = 1/2 at f = rbw/2
        sigma_f = rbw / (2.0 * math.sqrt(math.log(2.0)))
        sigma_samples = 1.0 / (TWO_PI * sigma_f) / dt
        return gaussian_filter1d(baseband.real, sigma_samples, mode="constant") + 1j * gaussian_filter1d(
            baseband.imag, sigma_samples, mode="constant"
        )
    # Single pole with -3 dB full bandwidth rbw: tau = 1 / (pi rbw)
    a = 1.0 - math.exp(-math.pi * rbw * dt)
    return lfilter([a], [1.0, a - 1.0], baseband)


def _gate_indices(rec: BeatRecord, start: float, length: float) -> tuple[int, int]:
    dt = rec.dt
    i0 = int(np.rint((start - rec.times[0]) / dt))
    n = max(1, int(np.rint(length / dt)))
    lo, hi = max(i0, 0), min(i0 + n, len(rec.times))
    if hi <= lo:
        raise GateError(
            f"gate [{start:.4g}, {start + length:.4g}] us does not overlap the record "
            f"[{rec.times[0]:.4g}, {rec.times[-1]:.4g}] us"
        )
    return lo, hi


def gated_power(rec: BeatRecord, g: GateConfig) -> float:
    """Mean demodulated power over the gate; equals lo^2 kappa_ext |alpha|^2 as rbw -> inf."""
    filtered = demodulate(rec, g.center_frequency, g.rbw, g.filter)
    lo, hi = _gate_indices(rec, g.gate_start, g.gate_length)
    return float(np.mean(np.abs(filtered[lo:hi]) ** 2) / 4.0)


def gated_power_scan(rec: BeatRecord, g: GateConfig, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Gate positions gate_start + k*step across the record and the power at each."""
    if not step > 0:
        raise InvalidParameterError(f"scan step must be positive (got {step})")
    filtered = demodulate(rec, g.center_frequency, g.rbw, g.filter)
    power = np.abs(filtered) ** 2 / 4.0
    cumulative = np.concatenate(([0.0], np.cumsum(power)))

    dt = rec.dt
    n_gate = max(1, int(np.rint(g.gate_length / dt)))
    last_start = rec.times[-1] - g.gate_length
    count = int(math.floor((last_start - g.gate_start) / step + 1e-9)) + 1
    if count <= 0:
        return np.empty(0), np.empty(0)
    starts = g.gate_start + np.arange(count) * step
    i0 = np.clip(np.rint((starts - rec.times[0]) / dt).astype(int), 0, len(rec.times) - 1)
    i1 = np.minimum(i0 + n_gate, len(rec.times))
    powers = (cumulative[i1] - cumulative[i0]) / (i1 - i0)
    return starts, powers


# ============ Beat estimation ============
def _sinusoid(t, amplitude, frequency, phase):
    return amplitude * np.cos(TWO_PI * frequency * t - phase)


def estimate_beat(
    rec: BeatRecord, window: tuple[float, float], amplitude_floor: float = 1e-12
) -> BeatEstimate:
    """
    Hann-weighted least-squares sinusoid fit over the window (at least 5 beat periods).

    The taper suppresses the image terms at twice the beat frequency, so the fitted phase
    moves one-to-one with the phase of the emitted field.
    """
    sub = rec.window(*window)
    t, v = sub.times, sub.voltage
    span = t[-1] - t[0]
    if np.max(np.abs(v)) <= amplitude_floor:
        raise InsufficientSignalError(f"no beat above {amplitude_floor:g} in window {window}")
    taper = windows.hann(len(v), sym=True)

    # Coarse guess from the zero-padded spectrum
    n_fft = 1 << (int(math.ceil(math.log2(len(v)))) + 3)
    spectrum = np.fft.rfft(taper * (v - v.mean()), n=n_fft)
    freqs = np.fft.rfftfreq(n_fft, d=sub.dt)
    f0 = float(freqs[np.argmax(np.abs(spectrum[1:])) + 1])
    if f0 * span < 5.0:
        raise InvalidParameterError(
            f"window of {span:.4g} us holds fewer than 5 periods at {f0:.4g} MHz"
        )

    t_mid = 0.5 * (t[0] + t[-1])
    tc = t - t_mid
    iq = np.sum(taper * v * np.exp(-1j * TWO_PI * f0 * tc)) * 2.0 / np.sum(taper)
    model = Model(_sinusoid)
    params = model.make_params(amplitude=abs(iq), frequency=f0, phase=-float(np.angle(iq)))
    params["amplitude"].set(min=0.0)
    result = model.fit(
        v, params, t=tc, weights=np.sqrt(taper), fit_kws={"xtol": 1e-13, "ftol": 1e-13}
    )
    if not result.success:
        raise InsufficientSignalError(f"sinusoid fit failed: {result.message}")

    frequency = result.params["frequency"].value
    amplitude = result.params["amplitude"].value
    if amplitude <= amplitude_floor:
        raise InsufficientSignalError(f"fitted amplitude {amplitude:g} below floor")
    # Refer the phase from the window centre back to t = 0
    phase = result.params["phase"].value + TWO_PI * frequency * t_mid
    phase = float((phase + np.pi) % TWO_PI - np.pi)
    return BeatEstimate(frequency=frequency, phase=phase, amplitude=amplitude, nfev=result.nfev)


__all__ = [
    "BeatRecord",
    "GateConfig",
    "BeatEstimate",
    "synthesize_beat",
    "demodulate",
    "gated_power",
    "gated_power_scan",
    "estimate_beat",
]
