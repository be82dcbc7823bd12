"""
Experiment runners: light storage and retrieval, storage lifetime, readout pulse shaping,
OMIT and storage spectra, and the cooperativity fit.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from lmfit.models import ExponentialModel
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from ..exceptions import FitError, InvalidParameterError, InvalidSequenceError
from ..models.params import SystemParams, coupling_from_cooperativity, cooperativity
from ..utils.units import TWO_PI, angular_to_mhz
from .analytic import adiabatic_retrieval_rate, omit_dip_width, omit_steady_state
from .detection import (
    BeatRecord,
    GateConfig,
    demodulate,
    gated_power,
    gated_power_scan,
    synthesize_beat,
)
from .dynamics import Trajectory, build_trajectory, default_step, integrate, integrate_batch
from .sequence import PulseSequence, drive_profile, standard_sequence

logger = logging.getLogger(__name__)

RINGDOWN_KAPPA_TIMES = 20.0
SWEEP_CHUNK = 64
STEADY_TRANSIENT = 0.01


# ============ Domain Types ============
@dataclass(frozen=True)
class Spectrum:
    """Power versus signal-minus-control detuning (MHz)."""
    detunings: np.ndarray
    powers: np.ndarray
    kind: str
    drive_detuning: float
    steady_state: bool = True
    transient_ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in ("omit", "storage"):
            raise InvalidParameterError(f"unknown spectrum kind '{self.kind}'")
        if self.detunings.shape != self.powers.shape:
            raise InvalidParameterError("detunings and powers differ in length")
        if np.any(np.diff(self.detunings) <= 0):
            raise InvalidParameterError("spectrum detunings must be strictly increasing")

    @property
    def delta(self) -> np.ndarray:
        """Signal detuning from the cavity, rad/us."""
        return TWO_PI * self.detunings + self.drive_detuning


@dataclass(frozen=True)
class StorageResult:
    trajectory: Trajectory
    beat: BeatRecord
    scan_times: np.ndarray
    scan_powers: np.ndarray
    input_photons: float
    retrieved_energy: float
    stored_phonons: float
    write_end_phonons: float

    @property
    def efficiency(self) -> float:
        """Retrieved photons per input signal photon."""
        if self.input_photons == 0:
            return float("nan")
        return self.retrieved_energy / self.input_photons

    @property
    def storage_ratio(self) -> float:
        """Phonon number at readout onset over phonon number at writing end."""
        if self.write_end_phonons == 0:
            return float("nan")
        return self.stored_phonons / self.write_end_phonons


@dataclass(frozen=True)
class DelaySeries:
    delays: np.ndarray
    effective_delays: np.ndarray
    energies: np.ndarray
    fitted_rate: float
    fitted_amplitude: float


@dataclass(frozen=True)
class ReadoutResult:
    coupling: float
    beat: BeatRecord
    envelope_times: np.ndarray
    envelope: np.ndarray
    decay_rate: float
    analytic_rate: float
    retrieved: bool

    @property
    def one_over_e_time(self) -> float:
        return 1.0 / self.decay_rate if self.decay_rate > 0 else float("inf")


@dataclass(frozen=True)
class LineMetrics:
    """Position (MHz), depth or peak ratio, and full width at half depth/height (MHz)."""
    position: float
    ratio: float
    width: float


@dataclass(frozen=True)
class FitResult:
    cooperativity: float
    coupling: float
    residual_norm: float
    iterations: int

    def report(self) -> dict:
        return {
            "cooperativity_ratio": self.cooperativity,
            "coupling_mhz": angular_to_mhz(self.coupling),
            "residual_norm_arb": self.residual_norm,
            "iterations_count": self.iterations,
        }


# ============ Helpers ============
def _ringdown(params: SystemParams) -> float:
    return RINGDOWN_KAPPA_TIMES / params.kappa


def _require_readout(sequence: PulseSequence) -> None:
    if sequence.readout is None:
        raise InvalidSequenceError(f"sequence '{sequence.name}' has no readout pulse")


def retrieval_window(sequence: PulseSequence, params: SystemParams) -> tuple[float, float]:
    """Readout support plus a cavity ring-down tail."""
    _require_readout(sequence)
    t0, t1 = sequence.readout.envelope.support
    return t0, t1 + _ringdown(params)


def merge_grid(values, rel_tol: float = 1e-9) -> np.ndarray:
    """Sorted detunings with near-coincident points collapsed."""
    grid = np.sort(np.asarray(values, dtype=float).ravel())
    if grid.size < 2:
        return grid
    tol = rel_tol * max(float(np.max(np.abs(grid))), 1.0)
    keep = np.concatenate(([True], np.diff(grid) > tol))
    return grid[keep]


def default_detuning_grid(
    params: SystemParams,
    coupling: float,
    points: int = 201,
    span_kappa: float = 3.0,
    dense_points: int = 41,
    dense_span: float = 3.0,
) -> np.ndarray:
    """Coarse grid over +-span_kappa*kappa plus a dense one over +-dense_span*(1+C)gamma_m."""
    coarse = np.linspace(-span_kappa * params.kappa, span_kappa * params.kappa, points)
    C = cooperativity(coupling, params.gamma_m, params.kappa) if params.gamma_m > 0 else 0.0
    width = omit_dip_width(C, params.gamma_m)
    dense = np.linspace(-dense_span * width, dense_span * width, dense_points)
    return merge_grid(np.concatenate([coarse, dense]))


def _sweep(
    sequence: PulseSequence,
    params: SystemParams,
    detunings: np.ndarray,
    t_end: float,
    dt: float,
    measure: Callable[[Trajectory], float],
    threads: int = 1,
    chunk: int = SWEEP_CHUNK,
) -> np.ndarray:
    """Integrate and measure every detuning; chunking is independent of the worker count."""
    n_steps = int(round(t_end / dt))
    half = np.arange(2 * n_steps + 1) * (dt / 2.0)
    profile = drive_profile(sequence, half)
    chunks = [detunings[i : i + chunk] for i in range(0, len(detunings), chunk)]

    def run_chunk(block: np.ndarray) -> list[float]:
        times, alpha, beta = integrate_batch(sequence, params, (t_end, dt), block)
        values = []
        for i, delta in enumerate(block):
            point = sequence.with_signal(detuning=float(delta))
            traj = build_trajectory(
                point, params, times, alpha[:, i], beta[:, i], delta, dt, profile
            )
            values.append(measure(traj))
        return values

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(block) for block in chunks]
    return np.array([v for block in results for v in block])


# ============ Light storage ============
def run_light_storage(
    params: SystemParams,
    sequence: PulseSequence,
    gate: GateConfig,
    dt: float | None = None,
    scan_step: float = 0.01,
    lo_amp: float = 1.0,
) -> StorageResult:
    """Integrate, synthesize the beat and scan the gate across the whole trace."""
    _require_readout(sequence)
    dt = dt or default_step(params, sequence, [sequence.signal.detuning])
    t_end = sequence.end_time + _ringdown(params)
    logger.info(f"Light storage: {sequence.name} on {params.label}, t_end={t_end:.3g} us")

    traj = integrate(sequence, params, (t_end, dt))
    beat = synthesize_beat(traj, params, lo_amp)
    scan_times, scan_powers = gated_power_scan(beat, gate, scan_step)

    write_end = sequence.writing.envelope.support[1]
    readout_onset = sequence.readout.envelope.support[0]
    r0, r1 = retrieval_window(sequence, params)
    return StorageResult(
        trajectory=traj,
        beat=beat,
        scan_times=scan_times,
        scan_powers=scan_powers,
        input_photons=float(trapezoid(np.abs(traj.a_in) ** 2, dx=traj.dt)),
        retrieved_energy=traj.energy(r0, min(r1, traj.times[-1])),
        stored_phonons=float(traj.phonons[traj.index(readout_onset)]),
        write_end_phonons=float(traj.phonons[traj.index(write_end)]),
    )


def _move_readout(sequence: PulseSequence, delay: float) -> PulseSequence:
    envelope = replace(sequence.readout.envelope, t_start=sequence.writing.envelope.t_end + delay)
    return replace(sequence, readout=replace(sequence.readout, envelope=envelope))


def storage_energy_vs_delay(
    params: SystemParams,
    base_sequence: PulseSequence,
    delays: Sequence[float],
    dt: float | None = None,
    threads: int = 1,
) -> DelaySeries:
    """
    Retrieved energy for each writing-readout delay, with a single-exponential fit.

    Delays shorter than 2*edge + 20/kappa are raised to that value so that the retrieval
    window never contains signal ring-down.
    """
    _require_readout(base_sequence)
    if any(d < 0 for d in delays):
        raise InvalidParameterError("delays must be non-negative")
    min_delay = 2.0 * base_sequence.readout.envelope.edge_time + _ringdown(params)
    effective = np.array([max(float(d), min_delay) for d in delays])
    dt = dt or default_step(params, base_sequence, [base_sequence.signal.detuning])

    def retrieved(delay: float) -> float:
        sequence = _move_readout(base_sequence, delay)
        t0, t1 = retrieval_window(sequence, params)
        traj = integrate(sequence, params, (t1, dt))
        return traj.energy(t0, t1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            energies = np.array(list(pool.map(retrieved, effective)))
    else:
        energies = np.array([retrieved(d) for d in effective])

    if np.all(energies > 0) and len(energies) >= 2:
        slope, intercept = np.polyfit(effective, np.log(energies), 1)
        rate, amplitude = float(-slope), float(np.exp(intercept))
    else:
        rate, amplitude = float("nan"), float("nan")
    logger.info(f"Storage lifetime fit: rate/2pi = {angular_to_mhz(rate):.5g} MHz")
    return DelaySeries(
        delays=np.asarray(delays, dtype=float),
        effective_delays=effective,
        energies=energies,
        fitted_rate=rate,
        fitted_amplitude=amplitude,
    )


# ============ Readout pulse shaping ============
def _fit_envelope_decay(times: np.ndarray, envelope: np.ndarray) -> float:
    model = ExponentialModel()
    x = times - times[0]
    params = model.guess(envelope, x=x)
    result = model.fit(envelope, params, x=x)
    return 1.0 / result.params["decay"].value


def run_readout_series(
    params: SystemParams,
    couplings: Sequence[float],
    base_sequence: PulseSequence | None = None,
    dt: float | None = None,
    lo_amp: float = 1.0,
) -> list[ReadoutResult]:
    """Retrieved-pulse beat and envelope decay rate for each readout coupling G."""
    base = base_sequence or standard_sequence("fig4", params)
    _require_readout(base)
    results = []
    for G in couplings:
        envelope = replace(base.readout.envelope, peak=float(G))
        sequence = replace(base, readout=replace(base.readout, envelope=envelope))
        step = dt or default_step(params, sequence, [sequence.signal.detuning])
        t_end = sequence.end_time + _ringdown(params)
        traj = integrate(sequence, params, (t_end, step))
        beat = synthesize_beat(traj, params, lo_amp)

        center = angular_to_mhz(sequence.signal.detuning - sequence.readout.detuning)
        amplitude = np.abs(demodulate(beat, center)) / 2.0
        r0, r1 = sequence.readout.envelope.support
        in_window = (beat.times >= r0) & (beat.times <= r1)
        env_times, env = beat.times[in_window], amplitude[in_window]

        edge = sequence.readout.envelope.edge_time
        fit_mask = (env_times >= sequence.readout.envelope.t_start + edge + 10.0 / params.kappa) & (
            env_times <= sequence.readout.envelope.t_end - edge
        )
        retrieved = bool(G > 0 and np.max(env, initial=0.0) > 1e-9 * np.max(amplitude, initial=0.0))
        rate = _fit_envelope_decay(env_times[fit_mask], env[fit_mask]) if retrieved else float("nan")
        analytic = adiabatic_retrieval_rate(G, params).rate
        logger.info(
            f"Readout G/2pi={angular_to_mhz(G):.3g} MHz: fitted rate/2pi={angular_to_mhz(rate):.4g}, "
            f"adiabatic {angular_to_mhz(analytic):.4g} MHz"
        )
        results.append(
            ReadoutResult(
                coupling=float(G),
                beat=beat.window(r0, r1),
                envelope_times=env_times,
                envelope=env,
                decay_rate=rate,
                analytic_rate=analytic,
                retrieved=retrieved,
            )
        )
    return results


# ============ Spectra ============
def run_omit_sweep(
    params: SystemParams,
    control_coupling: float,
    detunings=None,
    gate: GateConfig | None = None,
    sequence: PulseSequence | None = None,
    dt: float | None = None,
    threads: int = 1,
    lo_amp: float = 1.0,
) -> Spectrum:
    """Gated emitted power versus signal detuning under a long red-sideband control."""
    base = sequence or standard_sequence("fig5-omit", params)
    envelope = replace(base.writing.envelope, peak=float(control_coupling))
    base = replace(base, writing=replace(base.writing, envelope=envelope), readout=None)
    write = base.writing.envelope
    gate = gate or GateConfig(gate_start=write.t_start + 6.5, gate_length=1.0, rbw=1.0)

    deltas = merge_grid(
        np.asarray(detunings, dtype=float)
        if detunings is not None
        else default_detuning_grid(params, control_coupling)
    )
    C = cooperativity(control_coupling, params.gamma_m, params.kappa) if params.gamma_m > 0 else 0.0
    gamma_eff = omit_dip_width(C, params.gamma_m)
    # switch-on transient amplitude left at the gate, relative to the steady response
    settle = gate.gate_start - write.t_start
    transient = math.exp(-0.5 * gamma_eff * settle) if gamma_eff > 0 else 1.0
    steady = transient <= STEADY_TRANSIENT
    if not steady:
        logger.warning(
            f"OMIT gate opens before the mechanical response reaches steady state "
            f"(transient amplitude {transient:.3g} of steady)"
        )

    dt = dt or default_step(params, base, deltas)
    t_end = max(gate.gate_start + gate.gate_length, base.end_time) + 2.0 * dt

    def measure(traj: Trajectory) -> float:
        return gated_power(synthesize_beat(traj, params, lo_amp), gate)

    logger.info(f"OMIT sweep: {len(deltas)} detunings on {params.label}, C={C:.4g}")
    powers = _sweep(base, params, deltas, t_end, dt, measure, threads)
    return Spectrum(
        detunings=angular_to_mhz(deltas - base.writing.detuning),
        powers=powers,
        kind="omit",
        drive_detuning=base.writing.detuning,
        steady_state=bool(steady),
        transient_ratio=float(transient),
    )


def run_storage_sweep(
    params: SystemParams,
    sequence: PulseSequence | None = None,
    detunings=None,
    gate: GateConfig | None = None,
    dt: float | None = None,
    threads: int = 1,
    lo_amp: float = 1.0,
) -> Spectrum:
    """Gated retrieved power versus signal detuning; the analyzer sits at the mechanical beat."""
    base = sequence or standard_sequence("fig5-storage", params)
    _require_readout(base)
    readout = base.readout.envelope
    beat_mhz = angular_to_mhz(-base.readout.detuning)
    if gate is None:
        gate = GateConfig(gate_start=readout.t_start + readout.duration / 2.0 - 0.5, gate_length=1.0, rbw=1.0)
    gate = replace(gate, center_frequency=beat_mhz if gate.center_frequency is None else gate.center_frequency)

    deltas = merge_grid(
        np.asarray(detunings, dtype=float)
        if detunings is not None
        else default_detuning_grid(params, base.writing.envelope.peak)
    )
    dt = dt or default_step(params, base, deltas)
    t_end = max(gate.gate_start + gate.gate_length, base.end_time) + 2.0 * dt

    def measure(traj: Trajectory) -> float:
        return gated_power(synthesize_beat(traj, params, lo_amp), gate)

    logger.info(f"Storage sweep: {len(deltas)} detunings on {params.label}")
    powers = _sweep(base, params, deltas, t_end, dt, measure, threads)
    return Spectrum(
        detunings=angular_to_mhz(deltas - base.writing.detuning),
        powers=powers,
        kind="storage",
        drive_detuning=base.writing.detuning,
    )


def synthetic_omit_spectrum(params: SystemParams, C: float, detunings=None) -> Spectrum:
    """Noiseless closed-form OMIT spectrum (emitted power) at cooperativity C."""
    G = coupling_from_cooperativity(C, params.gamma_m, params.kappa)
    deltas = merge_grid(
        np.asarray(detunings, dtype=float) if detunings is not None else default_detuning_grid(params, G)
    )
    response = omit_steady_state(deltas, G, params)
    return Spectrum(
        detunings=angular_to_mhz(deltas + params.omega_m),
        powers=np.asarray(response.emitted_power),
        kind="omit",
        drive_detuning=-params.omega_m,
    )


def _off_dip(delta: np.ndarray, params: SystemParams) -> np.ndarray:
    off = np.abs(delta) >= 0.25 * params.kappa
    return off if off.sum() >= 3 else np.ones_like(off)


def _bare_shape(delta: np.ndarray, params: SystemParams) -> np.ndarray:
    return 1.0 / (params.kappa ** 2 / 4.0 + delta ** 2)


def _crossing(x: np.ndarray, y: np.ndarray, start: int, level: float, step: int) -> float:
    """Walk from `start` in direction `step` until y crosses `level`; interpolate."""
    i = start
    below = y[start] < level
    while 0 <= i + step < len(y):
        j = i + step
        if (y[j] < level) != below:
            return float(x[i] + (level - y[i]) * (x[j] - x[i]) / (y[j] - y[i]))
        i = j
    return float("nan")


def measure_dip(spectrum: Spectrum, params: SystemParams) -> LineMetrics:
    """Dip position, depth ratio against the bare-cavity envelope and full width at half depth."""
    delta = spectrum.delta
    bare = _bare_shape(delta, params)
    off = _off_dip(delta, params)
    scale = float(np.median(spectrum.powers[off] / bare[off]))
    ratio = spectrum.powers / (scale * bare)
    i_min = int(np.argmin(ratio))
    level = 1.0 - (1.0 - ratio[i_min]) / 2.0
    left = _crossing(spectrum.detunings, ratio, i_min, level, -1)
    right = _crossing(spectrum.detunings, ratio, i_min, level, +1)
    return LineMetrics(
        position=float(spectrum.detunings[i_min]),
        ratio=float(ratio[i_min]),
        width=right - left,
    )


def measure_peak(spectrum: Spectrum) -> LineMetrics:
    """Peak position, peak power and full width at half maximum."""
    i_max = int(np.argmax(spectrum.powers))
    peak = float(spectrum.powers[i_max])
    left = _crossing(spectrum.detunings, spectrum.powers, i_max, peak / 2.0, -1)
    right = _crossing(spectrum.detunings, spectrum.powers, i_max, peak / 2.0, +1)
    return LineMetrics(position=float(spectrum.detunings[i_max]), ratio=peak, width=right - left)


# ============ Cooperativity fit ============
def fit_cooperativity(
    spectrum: Spectrum,
    params: SystemParams,
    bracket: tuple[float, float] = (0.0, 1e3),
    scan_points: int = 141,
) -> FitResult:
    """
    One-parameter least squares over C against the closed-form OMIT line. Data and model
    are both normalised by their median ratio to the bare cavity on off-dip points.
    """
    if params.gamma_m <= 0:
        raise InvalidParameterError("cooperativity fit needs gamma_m > 0")
    delta = spectrum.delta
    bare = _bare_shape(delta, params)
    off = _off_dip(delta, params)
    data_scale = float(np.median(spectrum.powers[off] / bare[off]))
    if not data_scale > 0:
        raise FitError("spectrum carries no power off the dip")
    data = spectrum.powers / data_scale
    norm = float(np.sqrt(np.sum(data ** 2)))

    def objective(C: float) -> float:
        G = coupling_from_cooperativity(max(C, 0.0), params.gamma_m, params.kappa)
        model = omit_steady_state(delta, G, params).intracavity_power
        model = model / np.median(model[off] / bare[off])
        return float(np.sum((data - model) ** 2)) / norm ** 2

    lo, hi = bracket
    grid = np.concatenate(([lo], np.logspace(-4, math.log10(hi), scan_points)))
    grid = grid[(grid >= lo) & (grid <= hi)]
    values = np.array([objective(C) for C in grid])
    i = int(np.argmin(values))
    if i == len(grid) - 1:
        raise FitError(f"cooperativity fit ran into the bracket edge C = {hi:g}")
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    result = minimize_scalar(
        objective,
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-6 * max(grid[i], 1e-4), "maxiter": 500},
    )
    if not result.success:
        raise FitError(f"cooperativity fit did not converge within [{lo}, {hi}]")

    C = float(result.x)
    logger.info(f"Fitted C = {C:.5g} ({len(grid) + result.nfev} evaluations)")
    return FitResult(
        cooperativity=C,
        coupling=coupling_from_cooperativity(C, params.gamma_m, params.kappa),
        residual_norm=math.sqrt(result.fun),
        iterations=len(grid) + int(result.nfev),
    )


__all__ = [
    "Spectrum",
    "StorageResult",
    "DelaySeries",
    "ReadoutResult",
    "LineMetrics",
    "FitResult",
    "retrieval_window",
    "merge_grid",
    "default_detuning_grid",
    "run_light_storage",
    "storage_energy_vs_delay",
    "run_readout_series",
    "run_omit_sweep",
    "run_storage_sweep",
    "synthetic_omit_spectrum",
    "measure_dip",
    "measure_peak",
    "fit_cooperativity",
]
