"""
Unit conventions.

Configuration speaks linear frequency in MHz, times in us and powers in mW.
Internally every rate is angular, in rad/us (1 MHz linear = 2*pi rad/us).
"""
import numpy as np
from scipy import constants

TWO_PI = 2.0 * np.pi


def mhz_to_angular(nu_mhz):
    """Linear frequency in MHz -> angular frequency in rad/us."""
    return TWO_PI * np.asarray(nu_mhz, dtype=float) if np.ndim(nu_mhz) else TWO_PI * float(nu_mhz)


def angular_to_mhz(omega):
    """Angular frequency in rad/us -> linear frequency in MHz."""
    return np.asarray(omega, dtype=float) / TWO_PI if np.ndim(omega) else float(omega) / TWO_PI


def photon_flux_from_power(power_mw: float, wavelength_nm: float) -> float:
    """Photon flux in photons/us carried by an optical power in mW."""
    photon_energy = constants.h * constants.c / (wavelength_nm * 1e-9)
    return power_mw * 1e-3 / photon_energy * 1e-6
