"""
Pulse envelopes and the experiment timeline.

Maps a time t (us) to the instantaneous drive coupling G(t), the drive detuning Delta(t)
and the input signal amplitude A_in(t).
"""
from dataclasses import dataclass, replace
import logging
from collections.abc import Mapping
from typing import Any

import numpy as np

from ..exceptions import InvalidSequenceError
from ..models.params import SystemParams, coupling_rate_from_power
from ..utils.units import mhz_to_angular, photon_flux_from_power

logger = logging.getLogger(__name__)

DEFAULT_EDGE_TIME_US = 0.02
DEFAULT_LEAD_US = 0.2


# ============ Domain Types ============
@dataclass(frozen=True)
class PulseEnvelope:
    """
    Rectangular pulse with cosine edges of half-width `edge_time`.

    The rise spans [t_start - edge_time, t_start + edge_time] and the fall spans
    [t_end - edge_time, t_end + edge_time], so the area is peak * duration.
    """
    t_start: float
    duration: float
    peak: float
    edge_time: float = DEFAULT_EDGE_TIME_US

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidSequenceError(f"pulse duration must be positive (got {self.duration})")
        if self.edge_time < 0:
            raise InvalidSequenceError(f"edge_time must be non-negative (got {self.edge_time})")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside which the envelope is zero."""
        return self.t_start - self.edge_time, self.t_end + self.edge_time

    def values(self, t) -> np.ndarray:
        """Vectorized envelope evaluation."""
        t = np.asarray(t, dtype=float)
        if self.edge_time == 0:
            inside = (t >= self.t_start) & (t < self.t_end)
            return np.where(inside, self.peak, 0.0)
        width = 2.0 * self.edge_time
        rise = np.clip((t - (self.t_start - self.edge_time)) / width, 0.0, 1.0)
        fall = np.clip(((self.t_end + self.edge_time) - t) / width, 0.0, 1.0)
        shape = 0.5 * (1.0 - np.cos(np.pi * np.minimum(rise, fall)))
        return self.peak * shape


@dataclass(frozen=True)
class SignalInput:
    """Input signal: envelope in sqrt(photons/us), detuning delta = w_in - w0, phase."""
    envelope: PulseEnvelope
    detuning: float = 0.0
    phase: float = 0.0


@dataclass(frozen=True)
class DriveTone:
    """Red-sideband drive: envelope peak is G in rad/us, detuning Delta from w0."""
    envelope: PulseEnvelope
    detuning: float


@dataclass(frozen=True)
class DriveState:
    """Instantaneous inputs of the coupled-mode equations."""
    G: float
    detuning: float
    a_in: complex


@dataclass(frozen=True)
class DriveProfile:
    """Drive inputs sampled on a time grid."""
    times: np.ndarray
    G: np.ndarray
    detuning: np.ndarray
    a_in: np.ndarray


def _overlaps(a: PulseEnvelope, b: PulseEnvelope) -> bool:
    (a0, a1), (b0, b1) = a.support, b.support
    return a0 < b1 and b0 < a1


@dataclass(frozen=True)
class PulseSequence:
    """Writing tone + signal, with an optional readout tone."""
    writing: DriveTone
    signal: SignalInput
    readout: DriveTone | None = None
    name: str = "custom"

    def __post_init__(self):
        if (
            self.readout is not None
            and _overlaps(self.writing.envelope, self.readout.envelope)
            and self.writing.detuning != self.readout.detuning
        ):
            raise InvalidSequenceError(
                "writing and readout envelopes overlap with different drive detunings"
            )

    @property
    def delay(self) -> float | None:
        """Time between the end of writing and the start of readout (us)."""
        if self.readout is None:
            return None
        return self.readout.envelope.t_start - self.writing.envelope.t_end

    @property
    def tones(self) -> tuple[tuple[str, DriveTone], ...]:
        tones = [("writing", self.writing)]
        if self.readout is not None:
            tones.append(("readout", self.readout))
        return tuple(tones)

    @property
    def end_time(self) -> float:
        """Latest time at which any envelope is non-zero."""
        ends = [self.writing.envelope.support[1], self.signal.envelope.support[1]]
        if self.readout is not None:
            ends.append(self.readout.envelope.support[1])
        return max(ends)

    @property
    def max_coupling(self) -> float:
        return max(abs(tone.envelope.peak) for _, tone in self.tones)

    @property
    def edge_time(self) -> float:
        edges = [tone.envelope.edge_time for _, tone in self.tones]
        edges.append(self.signal.envelope.edge_time)
        positive = [e for e in edges if e > 0]
        return min(positive) if positive else 0.0

    def with_signal(self, **changes) -> "PulseSequence":
        """Copy with signal fields (detuning, phase, envelope) replaced."""
        return replace(self, signal=replace(self.signal, **changes))


# ============ Operations ============
def envelope_value(e: PulseEnvelope, t: float) -> float:
    """Envelope value at a single time."""
    return float(e.values(t))


def drive_profile(s: PulseSequence, times) -> DriveProfile:
    """G(t), Delta(t), A_in(t) on a grid. Delta falls back to the writing tone when dark."""
    times = np.asarray(times, dtype=float)
    g_write = s.writing.envelope.values(times)
    G = g_write.copy()
    detuning = np.full(times.shape, s.writing.detuning)
    if s.readout is not None:
        g_read = s.readout.envelope.values(times)
        G = G + g_read
        reading = g_read > 0
        if np.any(reading & (g_write > 0)) and s.readout.detuning != s.writing.detuning:
            raise InvalidSequenceError(
                "writing and readout envelopes overlap with different drive detunings"
            )
        detuning = np.where(reading, s.readout.detuning, detuning)
    a_in = s.signal.envelope.values(times) * np.exp(1j * s.signal.phase)
    return DriveProfile(times=times, G=G, detuning=detuning, a_in=a_in)


def sequence_at(s: PulseSequence, t: float) -> DriveState:
    """Instantaneous drive state at time t."""
    profile = drive_profile(s, np.array([t]))
    return DriveState(
        G=float(profile.G[0]),
        detuning=float(profile.detuning[0]),
        a_in=complex(profile.a_in[0]),
    )


# ============ Presets ============
# Standard timings; couplings in MHz are the measured estimates, powers in mW go through the
# sample calibration.
STANDARD_TIMINGS: dict[str, dict[str, Any]] = {
    "fig3": {
        "write_duration_us": 1.0,
        "write_coupling_mhz": 0.77,
        "readout_duration_us": 1.0,
        "readout_coupling_mhz": 0.77,
        "delay_us": 8.0,
        "signal_power_mw": 0.1,
    },
    "fig4": {
        "write_duration_us": 1.0,
        "write_coupling_mhz": 0.45,
        "readout_duration_us": 6.0,
        "readout_coupling_mhz": 0.45,
        "delay_us": 1.0,
        "signal_power_mw": 0.1,
    },
    "fig5-omit": {
        "write_duration_us": 8.0,
        "write_coupling_mhz": 0.38,
        "signal_power_mw": 0.1,
    },
    "fig5-storage": {
        "write_duration_us": 8.0,
        "write_coupling_mhz": 0.38,
        "readout_duration_us": 3.0,
        "readout_power_mw": 1.0,
        "delay_us": 0.0,
        "signal_power_mw": 0.1,
    },
}

OVERRIDE_KEYS = frozenset(
    {
        "write_duration_us",
        "write_coupling_mhz",
        "write_power_mw",
        "readout_duration_us",
        "readout_coupling_mhz",
        "readout_power_mw",
        "delay_us",
        "signal_power_mw",
        "signal_detuning_mhz",
        "signal_phase_rad",
        "drive_detuning_mhz",
        "edge_time_us",
        "lead_us",
    }
)


def _coupling(settings: Mapping[str, Any], prefix: str, params: SystemParams) -> float:
    """Resolve '<prefix>_power_mw' or '<prefix>_coupling_mhz' to G in rad/us."""
    power = settings.get(f"{prefix}_power_mw")
    if power is not None:
        return coupling_rate_from_power(power, params.calibration)
    return mhz_to_angular(settings.get(f"{prefix}_coupling_mhz", 0.0))


def standard_sequence(
    kind: str, params: SystemParams, overrides: Mapping[str, Any] | None = None
) -> PulseSequence:
    """Build one of the standard pulse sequences, with optional overrides."""
    if kind not in STANDARD_TIMINGS:
        raise InvalidSequenceError(
            f"unknown sequence kind '{kind}' (known: {', '.join(STANDARD_TIMINGS)})"
        )
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = set(overrides) - OVERRIDE_KEYS
    if unknown:
        raise InvalidSequenceError(f"unknown sequence override(s): {sorted(unknown)}")

    settings: dict[str, Any] = dict(STANDARD_TIMINGS[kind])
    # An explicit power replaces a preset coupling and vice versa
    for prefix in ("write", "readout"):
        if f"{prefix}_power_mw" in overrides:
            settings.pop(f"{prefix}_coupling_mhz", None)
        if f"{prefix}_coupling_mhz" in overrides:
            settings.pop(f"{prefix}_power_mw", None)
    settings.update(overrides)

    edge = settings.get("edge_time_us", DEFAULT_EDGE_TIME_US)
    lead = settings.get("lead_us", DEFAULT_LEAD_US)
    if "drive_detuning_mhz" in settings:
        drive_detuning = mhz_to_angular(settings["drive_detuning_mhz"])
    else:
        drive_detuning = -params.omega_m

    write_env = PulseEnvelope(
        t_start=lead,
        duration=settings["write_duration_us"],
        peak=_coupling(settings, "write", params),
        edge_time=edge,
    )
    flux = photon_flux_from_power(settings.get("signal_power_mw", 0.0), params.optical.wavelength_nm)
    signal = SignalInput(
        envelope=replace(write_env, peak=float(np.sqrt(flux))),
        detuning=mhz_to_angular(settings.get("signal_detuning_mhz", 0.0)),
        phase=settings.get("signal_phase_rad", 0.0),
    )

    readout = None
    if "readout_duration_us" in settings:
        delay = settings.get("delay_us", 0.0)
        if delay < 0:
            raise InvalidSequenceError(f"delay must be non-negative (got {delay})")
        readout = DriveTone(
            envelope=PulseEnvelope(
                t_start=write_env.t_end + delay,
                duration=settings["readout_duration_us"],
                peak=_coupling(settings, "readout", params),
                edge_time=edge,
            ),
            detuning=drive_detuning,
        )

    sequence = PulseSequence(
        writing=DriveTone(envelope=write_env, detuning=drive_detuning),
        signal=signal,
        readout=readout,
        name=kind,
    )
    logger.debug(f"Built sequence '{kind}' for {params.label}: delay={sequence.delay}")
    return sequence


__all__ = [
    "PulseEnvelope",
    "SignalInput",
    "DriveTone",
    "DriveState",
    "DriveProfile",
    "PulseSequence",
    "envelope_value",
    "drive_profile",
    "sequence_at",
    "standard_sequence",
    "STANDARD_TIMINGS",
    "OVERRIDE_KEYS",
]
