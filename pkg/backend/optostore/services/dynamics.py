"""
Time-domain integration of the linearized coupled-mode equations

    d(alpha)/dt = [i delta - kappa/2] alpha - i G beta + sqrt(kappa_ext) A_in
    d(beta)/dt  = [i (delta - Delta - omega_m) - gamma_m/2] beta - i G alpha

in the rotating frame where both equations are slow at Delta = -omega_m, delta = 0.
Fixed-step classical RK4; no adaptivity so that reruns are bitwise identical.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Any

import numpy as np
from scipy.integrate import trapezoid

from ..exceptions import DivergenceError, InvalidParameterError
from ..models.params import SystemParams
from .sequence import DriveState, PulseSequence, drive_profile

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
_CHECK_EVERY = 256


# ============ Domain Types ============
@dataclass(frozen=True)
class ModeState:
    """Intracavity signal amplitude (sqrt photons) and mechanical amplitude (sqrt phonons)."""
    alpha: complex = 0j
    beta: complex = 0j


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution on a uniform grid. Arrays are read-only."""
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    a_in: np.ndarray
    a_out: np.ndarray
    coupling: np.ndarray
    drive_detuning: np.ndarray
    signal_detuning: float
    kappa_ext: float
    dt: float
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("times", "alpha", "beta", "a_in", "a_out", "coupling", "drive_detuning"):
            arr = getattr(self, name)
            if arr.shape != self.times.shape:
                raise ValueError(f"series '{name}' does not match the time grid")
            arr.flags.writeable = False

    @property
    def emitted_power(self) -> np.ndarray:
        """kappa_ext |alpha|^2 in photons/us."""
        return emitted_power(self.alpha, self.kappa_ext)

    @property
    def phonons(self) -> np.ndarray:
        return np.abs(self.beta) ** 2

    def index(self, t: float) -> int:
        """Nearest grid index to time t (clipped to the grid)."""
        k = int(round((t - self.times[0]) / self.dt))
        return min(max(k, 0), len(self.times) - 1)

    def energy(self, t0: float, t1: float) -> float:
        """Emitted photons between t0 and t1 (trapezoid on the grid)."""
        i0, i1 = self.index(t0), self.index(t1)
        if i1 <= i0:
            return 0.0
        return float(trapezoid(self.emitted_power[i0 : i1 + 1], dx=self.dt))


# ============ Operations ============
def _rhs(alpha, beta, a_cav, c_mech, g, src):
    """Right-hand side for scalar or vectorized state."""
    d_alpha = a_cav * alpha - 1j * g * beta + src
    d_beta = c_mech * beta - 1j * g * alpha
    return d_alpha, d_beta


def eom_derivative(state: ModeState, drive: DriveState, p: SystemParams, delta: float) -> ModeState:
    """d(alpha, beta)/dt at one instant."""
    a_cav = 1j * delta - p.kappa / 2.0
    c_mech = 1j * (delta - drive.detuning - p.omega_m) - p.gamma_m / 2.0
    src = math.sqrt(p.kappa_ext) * drive.a_in
    d_alpha, d_beta = _rhs(state.alpha, state.beta, a_cav, c_mech, drive.G, src)
    return ModeState(alpha=complex(d_alpha), beta=complex(d_beta))


def output_field(alpha, a_in, kappa_ext: float):
    """A_out = A_in - sqrt(kappa_ext) alpha."""
    return a_in - np.sqrt(kappa_ext) * alpha


def emitted_power(alpha, kappa_ext: float):
    """kappa_ext |alpha|^2, the quantity the heterodyne chain measures."""
    return kappa_ext * np.abs(alpha) ** 2


def default_step(params: SystemParams, sequence: PulseSequence, detunings=(0.0,)) -> float:
    """
    Step size resolving the fastest rate, rounded down so that edge_time / dt is an integer
    and pulse boundaries land on grid points.
    """
    max_detuning = float(np.max(np.abs(detunings))) if np.size(detunings) else 0.0
    rates = [params.kappa, sequence.max_coupling, max_detuning, params.gamma_m]
    fastest = max(rates)
    if fastest <= 0:
        raise InvalidParameterError("cannot choose a step size: every rate is zero")
    target = 0.05 / fastest
    if params.kappa > 0:
        target = min(target, 0.02 / params.kappa)
    edge = sequence.edge_time
    if edge > 0:
        target = min(target, edge / 4.0)
        return edge / math.ceil(edge / target - 1e-9)
    return target


def _check_step(dt: float, params: SystemParams, sequence: PulseSequence, detunings) -> None:
    rates = [params.kappa, sequence.max_coupling, float(np.max(np.abs(detunings))), params.gamma_m]
    bound = 0.05 / max(rates) if max(rates) > 0 else math.inf
    if dt > bound * (1 + 1e-9):
        logger.warning(f"dt = {dt:.3g} us exceeds the stiffness bound {bound:.3g} us")


def _first_bad_time(times: np.ndarray, *series: np.ndarray) -> float | None:
    bad = np.zeros(times.shape, dtype=bool)
    for s in series:
        mag = np.abs(s)
        bad_s = ~np.isfinite(mag) | (mag > DIVERGENCE_LIMIT)
        bad |= bad_s if bad_s.ndim == 1 else bad_s.any(axis=tuple(range(1, bad_s.ndim)))
    if not bad.any():
        return None
    return float(times[np.argmax(bad)])


def _rk4(a_cav, a_mech, rot, g, src, h, alpha0, beta0, times):
    """
    Fixed-step RK4 over n = len(times) - 1 steps.

    rot, g, src are sampled at half steps (length 2n + 1) and passed as Python lists so the
    scalar path runs on plain complex numbers. a_cav, a_mech, alpha0, beta0 may be scalars
    or arrays (one entry per signal detuning).
    """
    n = len(times) - 1
    h2, h6 = h / 2.0, h / 6.0
    alpha, beta = alpha0, beta0
    alphas, betas = [alpha], [beta]
    for k in range(n):
        j = 2 * k
        c0, c1, c2 = a_mech + rot[j], a_mech + rot[j + 1], a_mech + rot[j + 2]
        g0, g1, g2 = g[j], g[j + 1], g[j + 2]
        s0, s1, s2 = src[j], src[j + 1], src[j + 2]

        k1a, k1b = _rhs(alpha, beta, a_cav, c0, g0, s0)
        k2a, k2b = _rhs(alpha + h2 * k1a, beta + h2 * k1b, a_cav, c1, g1, s1)
        k3a, k3b = _rhs(alpha + h2 * k2a, beta + h2 * k2b, a_cav, c1, g1, s1)
        k4a, k4b = _rhs(alpha + h * k3a, beta + h * k3b, a_cav, c2, g2, s2)
        alpha = alpha + h6 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        beta = beta + h6 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        alphas.append(alpha)
        betas.append(beta)

        if (k + 1) % _CHECK_EVERY == 0:
            mag = np.abs(np.asarray(alpha)) + np.abs(np.asarray(beta))
            if not np.all(mag <= DIVERGENCE_LIMIT):
                break

    alpha_arr, beta_arr = np.array(alphas), np.array(betas)
    bad_time = _first_bad_time(times[: len(alpha_arr)], alpha_arr, beta_arr)
    if bad_time is not None:
        raise DivergenceError(bad_time)
    return alpha_arr, beta_arr


def _grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0 or not t_end > 0:
        raise InvalidParameterError(f"grid needs t_end > 0 and dt > 0 (got {t_end}, {dt})")
    n = int(round(t_end / dt))
    return np.arange(n + 1) * dt


def integrate_batch(
    s: PulseSequence,
    p: SystemParams,
    grid: tuple[float, float],
    detunings,
    initial: ModeState = ModeState(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Integrate one sequence for several signal detunings at once.

    Returns (times, alpha, beta) with alpha/beta of shape (len(times), len(detunings)).
    """
    t_end, dt = grid
    detunings = np.asarray(detunings, dtype=float)
    times = _grid(t_end, dt)
    _check_step(dt, p, s, detunings)
    half = np.arange(2 * (len(times) - 1) + 1) * (dt / 2.0)
    profile = drive_profile(s, half)

    a_cav = 1j * detunings - p.kappa / 2.0
    a_mech = 1j * detunings - p.gamma_m / 2.0
    rot = (-1j * (profile.detuning + p.omega_m)).tolist()
    src = (math.sqrt(p.kappa_ext) * profile.a_in).tolist()
    g = profile.G.tolist()
    alpha0 = np.full(detunings.shape, complex(initial.alpha))
    beta0 = np.full(detunings.shape, complex(initial.beta))

    logger.debug(f"RK4 batch: {len(times) - 1} steps x {detunings.size} detunings, dt={dt:.3g} us")
    alpha, beta = _rk4(a_cav, a_mech, rot, g, src, dt, alpha0, beta0, times)
    return times, alpha, beta


def integrate(
    s: PulseSequence,
    p: SystemParams,
    grid: tuple[float, float],
    initial: ModeState = ModeState(),
) -> Trajectory:
    """Integrate a single sequence; records A_out at every grid point."""
    t_end, dt = grid
    times = _grid(t_end, dt)
    delta = s.signal.detuning
    _check_step(dt, p, s, [delta])
    half = np.arange(2 * (len(times) - 1) + 1) * (dt / 2.0)
    profile = drive_profile(s, half)

    a_cav = 1j * delta - p.kappa / 2.0
    a_mech = 1j * delta - p.gamma_m / 2.0
    rot = (-1j * (profile.detuning + p.omega_m)).tolist()
    src = (math.sqrt(p.kappa_ext) * profile.a_in).tolist()
    g = profile.G.tolist()

    logger.debug(f"RK4: {len(times) - 1} steps, dt={dt:.3g} us, delta={delta:.4g} rad/us")
    alpha, beta = _rk4(
        a_cav, a_mech, rot, g, src, dt, complex(initial.alpha), complex(initial.beta), times
    )
    return build_trajectory(s, p, times, alpha, beta, delta, dt, profile)


def build_trajectory(s, p, times, alpha, beta, delta, dt, profile=None) -> Trajectory:
    """Wrap integrator output (one detuning) into a Trajectory."""
    if profile is None:
        half = np.arange(2 * (len(times) - 1) + 1) * (dt / 2.0)
        profile = drive_profile(s, half)
    a_in = np.ascontiguousarray(profile.a_in[::2])
    return Trajectory(
        times=times,
        alpha=np.ascontiguousarray(alpha),
        beta=np.ascontiguousarray(beta),
        a_in=a_in,
        a_out=output_field(alpha, a_in, p.kappa_ext),
        coupling=np.ascontiguousarray(profile.G[::2]),
        drive_detuning=np.ascontiguousarray(profile.detuning[::2]),
        signal_detuning=float(delta),
        kappa_ext=p.kappa_ext,
        dt=dt,
        metadata={"params": p, "sequence": s, "dt_us": dt},
    )


__all__ = [
    "ModeState",
    "Trajectory",
    "eom_derivative",
    "output_field",
    "emitted_power",
    "default_step",
    "integrate",
    "integrate_batch",
    "build_trajectory",
    "DIVERGENCE_LIMIT",
]
