"""Utils package"""
from .units import (
    TWO_PI,
    mhz_to_angular,
    angular_to_mhz,
    photon_flux_from_power,
)

__all__ = ["TWO_PI", "mhz_to_angular", "angular_to_mhz", "photon_flux_from_power"]
