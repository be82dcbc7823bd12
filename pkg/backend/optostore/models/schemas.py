"""
Pydantic Models / Schemas

Run configuration (YAML file or request body) and API response models. Frequencies are
linear in MHz, times in us, powers in mW.
"""
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .params import SystemParams, get_preset

SampleName = Literal["sample-a", "sample-b"]
ScenarioName = Literal["fig3", "fig4", "fig5-omit", "fig5-storage", "storage-delay"]
SCENARIOS: tuple[str, ...] = ("fig3", "fig4", "fig5-omit", "fig5-storage", "storage-delay")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ============ Run configuration ============
class ParamsConfig(_Strict):
    """Device parameters laid over the sample preset; unset fields keep the preset value."""
    omega_m_mhz: float | None = Field(default=None, gt=0, description="Mechanical frequency omega_m/2pi")
    gamma_m_mhz: float | None = Field(default=None, ge=0, description="Mechanical energy damping gamma_m/2pi")
    kappa_mhz: float | None = Field(default=None, gt=0, description="Total optical energy decay kappa/2pi")
    kappa_ext_mhz: float | None = Field(
        default=None,
        gt=0,
        description="External coupling kappa_ext/2pi (default kappa/2 when kappa is given, else the preset)",
    )
    calibration_power_mw: float | None = Field(default=None, gt=0, description="Reference drive power")
    calibration_coupling_mhz: float | None = Field(
        default=None, ge=0, description="G/2pi measured at the reference power"
    )
    wavelength_nm: float | None = Field(default=None, gt=0, description="Optical wavelength")
    label: str | None = Field(default=None, description="Name used in logs and the summary")

    def apply_to(self, base: SystemParams) -> SystemParams:
        """Merge the given fields over `base`."""
        given = self.model_dump(exclude_none=True)
        if not given:
            return base
        merged = base.to_mhz()
        if "kappa_mhz" in given and "kappa_ext_mhz" not in given:
            merged["kappa_ext_mhz"] = None
        merged.update(given)
        return SystemParams.from_mhz(**merged)


class SequenceConfig(_Strict):
    """Overrides of the standard pulse sequence; unset fields keep the preset timing."""
    write_duration_us: float | None = Field(default=None, gt=0, description="Writing pulse length")
    write_coupling_mhz: float | None = Field(default=None, ge=0, description="Writing G/2pi")
    write_power_mw: float | None = Field(
        default=None, ge=0, description="Writing power, converted with the sample calibration"
    )
    readout_duration_us: float | None = Field(default=None, gt=0, description="Readout pulse length")
    readout_coupling_mhz: float | None = Field(default=None, ge=0, description="Readout G/2pi")
    readout_power_mw: float | None = Field(default=None, ge=0, description="Readout power")
    delay_us: float | None = Field(default=None, ge=0, description="Writing end to readout start")
    signal_power_mw: float | None = Field(default=None, ge=0, description="Input signal power")
    signal_detuning_mhz: float | None = Field(
        default=None, description="Signal detuning from the optical resonance"
    )
    signal_phase_rad: float | None = Field(default=None, description="Input signal phase")
    drive_detuning_mhz: float | None = Field(
        default=None, description="Drive detuning from the optical resonance (default -omega_m/2pi)"
    )
    edge_time_us: float | None = Field(default=None, ge=0, description="Cosine edge half-width")
    lead_us: float | None = Field(default=None, ge=0, description="Time before the writing pulse")

    def overrides(self) -> dict[str, Any]:
        return self.model_dump(exclude_none=True)


class GridConfig(_Strict):
    """Integration step and detuning-sweep grid."""
    dt_us: float | None = Field(default=None, gt=0, description="RK4 step (default: automatic)")
    points: int = Field(default=201, ge=3, description="Coarse sweep points over +-span_kappa*kappa")
    span_kappa: float = Field(default=3.0, gt=0, description="Coarse sweep half-span in units of kappa")
    dense_points: int = Field(default=41, ge=0, description="Dense points around the dip")
    dense_span_widths: float = Field(
        default=3.0, gt=0, description="Dense half-span in units of (1+C)gamma_m"
    )


class DetectionConfig(_Strict):
    """Gated spectrum-analyzer settings; unset fields take the scenario default."""
    rbw_mhz: float | None = Field(default=None, gt=0, description="Resolution bandwidth")
    gate_length_us: float | None = Field(default=None, gt=0, description="Gate length")
    gate_start_us: float | None = Field(default=None, description="First gate position")
    scan_step_us: float = Field(default=0.01, gt=0, description="Gate scan step")
    filter: Literal["single-pole", "gaussian"] = Field(
        default="single-pole", description="RBW filter shape"
    )
    lo_amplitude: float = Field(default=1.0, gt=0, description="Local oscillator amplitude")


class SweepConfig(_Strict):
    """Scenario-specific sweep settings."""
    readout_couplings_mhz: list[float] = Field(
        default=[0.2, 0.45, 0.6], description="Readout G/2pi values for fig4"
    )
    delays_us: list[float] = Field(
        default=[0.0, 8.0, 16.0, 24.0, 32.0], description="Storage delays for storage-delay"
    )
    fit: bool = Field(default=True, description="Fit the cooperativity to the OMIT spectrum")
    compare_omit: bool = Field(
        default=True, description="Also run the OMIT sweep for fig5-storage and compare positions"
    )


class RunConfig(_Strict):
    """One simulation run."""
    sample: SampleName = Field(default="sample-a", description="Sample preset")
    params: ParamsConfig | None = Field(default=None, description="Parameter overrides on the preset")
    scenario: ScenarioName = Field(default="fig3", description="Scenario to run")
    sequence: SequenceConfig = Field(default_factory=SequenceConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    detection: DetectionConfig = Field(default_factory=DetectionConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output_dir: str | None = Field(default=None, description="Output directory (CLI --out wins)")
    threads: int | None = Field(default=None, ge=1, description="Sweep worker threads")

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {
                "sample": "sample-b",
                "scenario": "fig5-omit",
                "grid": {"points": 101},
                "detection": {"rbw_mhz": 1.0},
            }
        },
    )

    def system_params(self) -> SystemParams:
        if self.params is not None:
            return self.params.apply_to(get_preset(self.sample))
        return get_preset(self.sample)


# ============ API responses ============
class PresetInfo(BaseModel):
    label: str
    description: str
    omega_m_mhz: float
    gamma_m_mhz: float
    kappa_mhz: float
    kappa_ext_mhz: float


class PresetsResponse(BaseModel):
    """Sample presets and scenario kinds."""
    samples: list[PresetInfo]
    scenarios: list[str]


class CheckInfo(BaseModel):
    name: str
    passed: bool
    severity: str
    detail: str


class ValidationResponse(BaseModel):
    """Response model for config validation."""
    valid: bool
    passed: bool
    label: str
    sideband_ratio: float
    checks: list[CheckInfo]


class RunResponse(BaseModel):
    """Response model for a run: the summary document the CLI writes."""
    summary: dict[str, Any]

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "summary": {
                    "scenario": "fig5-omit",
                    "derived": {"cooperativity_ratio": 0.3008, "dip_width_mhz": 0.1249},
                }
            }
        }
    )


class HealthResponse(BaseModel):
    """Response model for health check."""
    status: str
    tracking_enabled: bool
