"""
Closed-form results of the coupled-mode equations, used as oracles for the integrator.

All expressions assume a drive exactly on the red sideband (Delta = -omega_m), so the
two-photon detuning equals the signal detuning delta.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np

from ..exceptions import InvalidParameterError
from ..models.params import SystemParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OmitResponse:
    """Stationary intracavity response; arrays when evaluated on a detuning grid."""
    detuning: np.ndarray | float
    alpha_ss: np.ndarray | complex
    intracavity_power: np.ndarray | float
    emitted_power: np.ndarray | float


@dataclass(frozen=True)
class RetrievalRate:
    """Amplitude decay rate of the stored excitation during a constant readout."""
    rate: float
    in_regime: bool


def omit_steady_state(delta, G: float, p: SystemParams, a_in: complex = 1.0) -> OmitResponse:
    """alpha_ss = sqrt(kappa_ext) A_in / [kappa/2 - i delta + G^2 / (gamma_m/2 - i delta)]."""
    delta_arr = np.asarray(delta, dtype=float)
    mech = p.gamma_m / 2.0 - 1j * delta_arr
    if G != 0 and np.any(mech == 0):
        raise InvalidParameterError("mechanical pole: gamma_m = 0 at zero two-photon detuning")
    with np.errstate(divide="ignore", invalid="ignore"):
        dressing = np.where(mech == 0, 0.0, G * G / np.where(mech == 0, 1.0, mech))
    alpha = math.sqrt(p.kappa_ext) * a_in / (p.kappa / 2.0 - 1j * delta_arr + dressing)
    power = np.abs(alpha) ** 2
    if delta_arr.ndim == 0:
        return OmitResponse(
            detuning=float(delta_arr),
            alpha_ss=complex(alpha),
            intracavity_power=float(power),
            emitted_power=float(p.kappa_ext * power),
        )
    return OmitResponse(
        detuning=delta_arr,
        alpha_ss=alpha,
        intracavity_power=power,
        emitted_power=p.kappa_ext * power,
    )


def omit_dip_width(C: float, gamma_m: float) -> float:
    """Full width of the transparency dip, (1 + C) gamma_m."""
    if C < 0:
        raise InvalidParameterError(f"cooperativity must be non-negative (got {C})")
    return (1.0 + C) * gamma_m


def adiabatic_retrieval_rate(G: float, p: SystemParams) -> RetrievalRate:
    """gamma_m/2 + 2 G^2/kappa, valid while 4G << kappa."""
    in_regime = 4.0 * abs(G) <= 0.2 * p.kappa
    if not in_regime:
        logger.warning(
            f"adiabatic elimination outside its regime: 4G/kappa = {4.0 * G / p.kappa:.3g}"
        )
    return RetrievalRate(rate=p.gamma_m / 2.0 + 2.0 * G * G / p.kappa, in_regime=in_regime)


def mechanical_free_decay(beta0: complex, tau: float, gamma_m: float) -> complex:
    """beta(tau) = beta0 exp(-gamma_m tau / 2) in the rotating frame."""
    if tau < 0:
        raise InvalidParameterError(f"tau must be non-negative (got {tau})")
    return complex(beta0) * math.exp(-gamma_m * tau / 2.0)


def dip_half_depth_width(G: float, p: SystemParams, span: float | None = None, points: int = 20001) -> float:
    """
    Numerical full width at half depth of the closed-form dip, depth measured against the
    bare-cavity line. Zero when there is no dip (G = 0).
    """
    C = 4.0 * G * G / (p.gamma_m * p.kappa)
    if span is None:
        span = 10.0 * omit_dip_width(C, p.gamma_m)
    delta = np.linspace(-span, span, points)
    dressed = omit_steady_state(delta, G, p).intracavity_power
    bare = omit_steady_state(delta, 0.0, p).intracavity_power
    ratio = dressed / bare
    floor = ratio.min()
    if 1.0 - floor <= 1e-12:
        return 0.0
    level = 1.0 - (1.0 - floor) / 2.0
    below = np.nonzero(ratio <= level)[0]
    i0, i1 = below[0], below[-1]
    if i0 == 0 or i1 == len(delta) - 1:
        raise InvalidParameterError(f"dip wider than the span +-{span:g} rad/us")
    left = np.interp(level, [ratio[i0], ratio[i0 - 1]], [delta[i0], delta[i0 - 1]])
    right = np.interp(level, [ratio[i1], ratio[i1 + 1]], [delta[i1], delta[i1 + 1]])
    return float(right - left)


__all__ = [
    "OmitResponse",
    "RetrievalRate",
    "omit_steady_state",
    "omit_dip_width",
    "adiabatic_retrieval_rate",
    "mechanical_free_decay",
    "dip_half_depth_width",
]
