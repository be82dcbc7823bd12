"""
Scenario runner shared by the CLI and the HTTP API.

`execute` computes everything in memory and renders the artifacts to bytes; only
`run_to_directory` touches the disk, after the whole run has succeeded.
"""
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .. import __version__
from ..config import settings
from ..exceptions import ConfigError, InsufficientSignalError, InvalidParameterError
from ..models.params import (
    SystemParams,
    ValidationReport,
    cooperativity,
    optomechanical_damping,
    validate_params,
)
from ..models.schemas import RunConfig
from ..utils.io import digest, render_csv, render_gnuplot, render_json, write_artifacts
from ..utils.units import angular_to_mhz, mhz_to_angular
from .analytic import adiabatic_retrieval_rate, omit_dip_width
from .detection import GateConfig, estimate_beat
from .scenarios import (
    default_detuning_grid,
    fit_cooperativity,
    measure_dip,
    measure_peak,
    run_light_storage,
    run_omit_sweep,
    run_readout_series,
    run_storage_sweep,
    storage_energy_vs_delay,
)
from .sequence import PulseSequence, standard_sequence

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"


@dataclass
class ScenarioOutput:
    """CSV tables (file name -> column name -> values), results and extra JSON documents."""
    tables: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)
    documents: dict[str, dict[str, Any]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class RunOutput:
    summary: dict[str, Any]
    artifacts: dict[str, bytes]


# ============ Configuration ============
def load_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML run configuration (pydantic ValidationError propagates)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return RunConfig.model_validate(data)


def check_params(cfg: RunConfig) -> tuple[SystemParams, ValidationReport]:
    """Resolve the device parameters; positivity failures are configuration errors."""
    params = cfg.system_params()
    report = validate_params(params)
    if not report.usable:
        details = "; ".join(f"{c.name}: {c.detail}" for c in report.errors)
        raise ConfigError(f"invalid parameters for {params.label}: {details}")
    return params, report


# ============ Summary helpers ============
def _parameters_summary(p: SystemParams) -> dict[str, Any]:
    return {
        "omega_m_mhz": angular_to_mhz(p.omega_m),
        "gamma_m_mhz": angular_to_mhz(p.gamma_m),
        "kappa_mhz": angular_to_mhz(p.kappa),
        "kappa_ext_mhz": angular_to_mhz(p.kappa_ext),
        "wavelength_nm": p.optical.wavelength_nm,
        "calibration_power_mw": p.calibration.p_ref_mw,
        "calibration_coupling_mhz": angular_to_mhz(p.calibration.g_ref),
    }


def _sequence_summary(s: PulseSequence) -> dict[str, Any]:
    write = s.writing.envelope
    summary = {
        "name": s.name,
        "write_start_us": write.t_start,
        "write_duration_us": write.duration,
        "write_coupling_mhz": angular_to_mhz(write.peak),
        "drive_detuning_mhz": angular_to_mhz(s.writing.detuning),
        "edge_time_us": write.edge_time,
        "signal_flux_photons_per_us": s.signal.envelope.peak ** 2,
        "signal_detuning_mhz": angular_to_mhz(s.signal.detuning),
        "signal_phase_rad": s.signal.phase,
    }
    if s.readout is not None:
        summary.update(
            {
                "readout_start_us": s.readout.envelope.t_start,
                "readout_duration_us": s.readout.envelope.duration,
                "readout_coupling_mhz": angular_to_mhz(s.readout.envelope.peak),
                "delay_us": s.delay,
            }
        )
    return summary


def _derived_summary(p: SystemParams, s: PulseSequence) -> dict[str, Any]:
    G = s.writing.envelope.peak
    C = cooperativity(G, p.gamma_m, p.kappa) if p.gamma_m > 0 else float("nan")
    read_G = s.readout.envelope.peak if s.readout is not None else G
    retrieval = adiabatic_retrieval_rate(read_G, p)
    return {
        "cooperativity_ratio": C,
        "optomechanical_damping_mhz": angular_to_mhz(optomechanical_damping(G, p.kappa)),
        "dip_width_mhz": angular_to_mhz(omit_dip_width(C, p.gamma_m)) if p.gamma_m > 0 else float("nan"),
        "adiabatic_rate_mhz": angular_to_mhz(retrieval.rate),
        "adiabatic_in_regime": retrieval.in_regime,
        "sideband_ratio": p.omega_m / p.kappa,
    }


def _gate(cfg: RunConfig, start: float, length: float, rbw: float, center: float | None = None) -> GateConfig:
    d = cfg.detection
    return GateConfig(
        gate_start=d.gate_start_us if d.gate_start_us is not None else start,
        gate_length=d.gate_length_us or length,
        rbw=d.rbw_mhz or rbw,
        center_frequency=center,
        filter=d.filter,
    )


def _grid(cfg: RunConfig, p: SystemParams, G: float) -> np.ndarray:
    g = cfg.grid
    return default_detuning_grid(p, G, g.points, g.span_kappa, g.dense_points, g.dense_span_widths)


# ============ Scenarios ============
def _light_storage(cfg: RunConfig, p: SystemParams, s: PulseSequence, threads: int) -> ScenarioOutput:
    gate = _gate(cfg, start=0.0, length=0.1, rbw=30.0)
    result = run_light_storage(
        p, s, gate, dt=cfg.grid.dt_us, scan_step=cfg.detection.scan_step_us, lo_amp=cfg.detection.lo_amplitude
    )
    traj = result.trajectory
    out = ScenarioOutput()
    out.tables["trajectory.csv"] = {
        "t_us": traj.times,
        "re_alpha": traj.alpha.real,
        "im_alpha": traj.alpha.imag,
        "re_beta": traj.beta.real,
        "im_beta": traj.beta.imag,
        "emitted_power_photons_per_us": traj.emitted_power,
    }
    out.tables["beat.csv"] = {"t_us": result.beat.times, "voltage_arb": result.beat.voltage}
    out.tables["gated_scan.csv"] = {"gate_start_us": result.scan_times, "power_arb": result.scan_powers}
    out.results = {
        "step_us": traj.dt,
        "input_photons": result.input_photons,
        "retrieved_energy_photons": result.retrieved_energy,
        "efficiency_ratio": result.efficiency,
        "stored_phonons": result.stored_phonons,
        "write_end_phonons": result.write_end_phonons,
        "storage_ratio": result.storage_ratio,
        "scan_points_count": int(result.scan_times.size),
        "scan_peak_power_arb": float(np.max(result.scan_powers, initial=0.0)),
        "gate_length_us": gate.gate_length,
        "rbw_mhz": gate.rbw,
    }

    readout = s.readout.envelope
    try:
        beat = estimate_beat(result.beat, (readout.t_start + readout.edge_time, readout.t_end - readout.edge_time))
        out.results.update(
            {
                "beat_frequency_mhz": beat.frequency,
                "beat_phase_rad": beat.phase,
                "beat_amplitude_arb": beat.amplitude,
            }
        )
    except (InsufficientSignalError, InvalidParameterError) as e:
        logger.warning(f"No beat fit on the retrieved pulse: {e}")
        out.warnings.append("beat_fit_failed")
    return out


def _readout_series(cfg: RunConfig, p: SystemParams, s: PulseSequence, threads: int) -> ScenarioOutput:
    couplings = [mhz_to_angular(g) for g in cfg.sweep.readout_couplings_mhz]
    results = run_readout_series(p, couplings, s, dt=cfg.grid.dt_us, lo_amp=cfg.detection.lo_amplitude)
    out = ScenarioOutput()
    out.tables["readout_envelopes.csv"] = {
        "coupling_mhz": np.concatenate([np.full(r.envelope.size, angular_to_mhz(r.coupling)) for r in results]),
        "t_us": np.concatenate([r.envelope_times for r in results]),
        "envelope_arb": np.concatenate([r.envelope for r in results]),
    }
    out.results["readouts"] = [
        {
            "coupling_mhz": angular_to_mhz(r.coupling),
            "decay_rate_mhz": angular_to_mhz(r.decay_rate),
            "adiabatic_rate_mhz": angular_to_mhz(r.analytic_rate),
            "one_over_e_us": r.one_over_e_time,
            "retrieved": r.retrieved,
        }
        for r in results
    ]
    rates = [r.decay_rate for r in results if r.retrieved]
    out.results["rates_increasing"] = bool(np.all(np.diff(rates) > 0)) if len(rates) > 1 else True
    return out


def _omit(cfg: RunConfig, p: SystemParams, s: PulseSequence, threads: int) -> ScenarioOutput:
    G = s.writing.envelope.peak
    gate = _gate(cfg, start=s.writing.envelope.t_start + 6.5, length=1.0, rbw=1.0)
    spectrum = run_omit_sweep(
        p, G, _grid(cfg, p, G), gate, s, dt=cfg.grid.dt_us, threads=threads, lo_amp=cfg.detection.lo_amplitude
    )
    dip = measure_dip(spectrum, p)
    out = ScenarioOutput()
    out.tables["spectrum.csv"] = {"detuning_mhz": spectrum.detunings, "power_arb": spectrum.powers}
    out.results = {
        "points_count": int(spectrum.detunings.size),
        "steady_state": spectrum.steady_state,
        "transient_amplitude_ratio": spectrum.transient_ratio,
        "dip_position_mhz": dip.position,
        "dip_depth_ratio": dip.ratio,
        "measured_dip_width_mhz": dip.width,
    }
    if not spectrum.steady_state:
        out.warnings.append("gate_before_steady_state")
    if cfg.sweep.fit:
        fit = fit_cooperativity(spectrum, p)
        out.documents["fit_report.json"] = fit.report()
        out.results.update(
            {
                "fitted_cooperativity_ratio": fit.cooperativity,
                "fitted_dip_width_mhz": angular_to_mhz(omit_dip_width(fit.cooperativity, p.gamma_m)),
                "fit_residual_arb": fit.residual_norm,
            }
        )
    return out


def _storage_sweep(cfg: RunConfig, p: SystemParams, s: PulseSequence, threads: int) -> ScenarioOutput:
    G = s.writing.envelope.peak
    grid = _grid(cfg, p, G)
    readout = s.readout.envelope
    gate = _gate(cfg, start=readout.t_start + readout.duration / 2.0 - 0.5, length=1.0, rbw=1.0)
    spectrum = run_storage_sweep(p, s, grid, gate, dt=cfg.grid.dt_us, threads=threads, lo_amp=cfg.detection.lo_amplitude)
    peak = measure_peak(spectrum)
    out = ScenarioOutput()
    out.tables["spectrum.csv"] = {"detuning_mhz": spectrum.detunings, "power_arb": spectrum.powers}
    out.results = {
        "points_count": int(spectrum.detunings.size),
        "peak_position_mhz": peak.position,
        "peak_power_arb": peak.ratio,
        "peak_width_mhz": peak.width,
    }
    if cfg.sweep.compare_omit:
        overrides = {
            k: v
            for k, v in cfg.sequence.overrides().items()
            if not k.startswith("readout_") and k != "delay_us"
        }
        omit_sequence = standard_sequence("fig5-omit", p, overrides)
        omit_gate = GateConfig(gate_start=omit_sequence.writing.envelope.t_start + 6.5, gate_length=1.0, rbw=1.0)
        omit = run_omit_sweep(p, G, grid, omit_gate, omit_sequence, dt=cfg.grid.dt_us, threads=threads)
        dip = measure_dip(omit, p)
        out.tables["omit_spectrum.csv"] = {"detuning_mhz": omit.detunings, "power_arb": omit.powers}
        i = int(np.argmin(np.abs(spectrum.detunings - peak.position)))
        step = float(np.max(np.diff(spectrum.detunings[max(i - 1, 0) : i + 2])))
        out.results.update(
            {
                "omit_dip_position_mhz": dip.position,
                "position_offset_mhz": peak.position - dip.position,
                "local_grid_step_mhz": step,
            }
        )
    return out


def _storage_delay(cfg: RunConfig, p: SystemParams, s: PulseSequence, threads: int) -> ScenarioOutput:
    series = storage_energy_vs_delay(p, s, cfg.sweep.delays_us, dt=cfg.grid.dt_us, threads=threads)
    out = ScenarioOutput()
    out.tables["delay_series.csv"] = {
        "delay_us": series.delays,
        "effective_delay_us": series.effective_delays,
        "retrieved_energy_photons": series.energies,
    }
    out.results = {
        "fitted_rate_mhz": angular_to_mhz(series.fitted_rate),
        "fitted_amplitude_photons": series.fitted_amplitude,
        "rate_to_gamma_m_ratio": series.fitted_rate / p.gamma_m if p.gamma_m > 0 else float("nan"),
    }
    return out


_SCENARIOS: dict[str, tuple[str, Callable[..., ScenarioOutput]]] = {
    "fig3": ("fig3", _light_storage),
    "fig4": ("fig4", _readout_series),
    "fig5-omit": ("fig5-omit", _omit),
    "fig5-storage": ("fig5-storage", _storage_sweep),
    "storage-delay": ("fig3", _storage_delay),
}


# ============ Entry points ============
def scenario_sequence(cfg: RunConfig, params: SystemParams) -> PulseSequence:
    """Standard sequence the scenario runs on, with the config overrides applied."""
    kind, _ = _SCENARIOS[cfg.scenario]
    return standard_sequence(kind, params, cfg.sequence.overrides())


def execute(cfg: RunConfig, threads: int | None = None, gnuplot: bool = False) -> RunOutput:
    """Run the configured scenario; returns the summary and every rendered artifact."""
    params, report = check_params(cfg)
    threads = threads or cfg.threads or settings.THREADS
    _, handler = _SCENARIOS[cfg.scenario]
    sequence = scenario_sequence(cfg, params)
    logger.info(f"Running {cfg.scenario} on {params.label} {params.describe_mhz()} ({threads} thread(s))")

    output = handler(cfg, params, sequence, threads)

    artifacts: dict[str, bytes] = {name: render_csv(cols) for name, cols in output.tables.items()}
    artifacts.update({name: render_json(doc) for name, doc in output.documents.items()})
    if gnuplot:
        artifacts["plot.gp"] = render_gnuplot({name: list(cols) for name, cols in output.tables.items()})

    summary = {
        "scenario": cfg.scenario,
        "sample": params.label,
        "version": __version__,
        "parameters": _parameters_summary(params),
        "sequence": _sequence_summary(sequence),
        "derived": _derived_summary(params, sequence),
        "results": output.results,
        "warnings": [c.name for c in report.warnings] + output.warnings,
        "artifacts": {
            name: {"xxh64": digest(data), "size_bytes": len(data)} for name, data in artifacts.items()
        },
    }
    artifacts[SUMMARY_FILE] = render_json(summary)
    logger.info(f"Finished {cfg.scenario}: {len(artifacts)} artifact(s)")
    return RunOutput(summary=summary, artifacts=artifacts)


def run_to_directory(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    force: bool = False,
    threads: int | None = None,
    gnuplot: bool = False,
) -> tuple[RunOutput, list[Path]]:
    """Execute, then write the artifacts; nothing is written when the run fails."""
    target = Path(out_dir or cfg.output_dir or settings.OUTPUT_DIR)
    existing = [target / name for name in (SUMMARY_FILE,) if (target / name).exists()]
    if existing and not force:
        raise ConfigError(f"refusing to overwrite {existing[0]} (use --force)")
    output = execute(cfg, threads=threads, gnuplot=gnuplot)
    paths = write_artifacts(target, output.artifacts, force=force)
    return output, paths


__all__ = [
    "RunOutput",
    "ScenarioOutput",
    "SUMMARY_FILE",
    "load_config",
    "check_params",
    "scenario_sequence",
    "execute",
    "run_to_directory",
]
