"""
Services - simulation layer: sequences, integration, closed forms, detection, scenarios
"""
from .analytic import adiabatic_retrieval_rate, omit_dip_width, omit_steady_state
from .detection import GateConfig, estimate_beat, gated_power, gated_power_scan, synthesize_beat
from .dynamics import ModeState, Trajectory, default_step, integrate, integrate_batch
from .runner import execute, load_config, run_to_directory
from .scenarios import (
    Spectrum,
    fit_cooperativity,
    run_light_storage,
    run_omit_sweep,
    run_readout_series,
    run_storage_sweep,
    storage_energy_vs_delay,
)
from .sequence import PulseEnvelope, PulseSequence, standard_sequence

__all__ = [
    "adiabatic_retrieval_rate",
    "omit_dip_width",
    "omit_steady_state",
    "GateConfig",
    "estimate_beat",
    "gated_power",
    "gated_power_scan",
    "synthesize_beat",
    "ModeState",
    "Trajectory",
    "default_step",
    "integrate",
    "integrate_batch",
    "execute",
    "load_config",
    "run_to_directory",
    "Spectrum",
    "fit_cooperativity",
    "run_light_storage",
    "run_omit_sweep",
    "run_readout_series",
    "run_storage_sweep",
    "storage_energy_vs_delay",
    "PulseEnvelope",
    "PulseSequence",
    "standard_sequence",
]
