"""
Physical parameter types and scalar conversions.

All rates are angular frequencies in rad/us. Frequencies quoted as (omega, gamma, kappa)/2pi
in MHz are converted once, in `SystemParams.from_mhz`.
"""
from dataclasses import dataclass, field, replace
import logging
import math

from ..exceptions import InvalidParameterError
from ..utils.units import TWO_PI, angular_to_mhz, mhz_to_angular

logger = logging.getLogger(__name__)


# ============ Domain Types ============
@dataclass(frozen=True)
class OpticalMode:
    """Optical resonance. Detunings are measured from its frequency."""
    kappa_total: float
    kappa_ext: float
    wavelength_nm: float = 800.0


@dataclass(frozen=True)
class MechanicalMode:
    """Mechanical breathing mode."""
    omega_m: float
    gamma_m: float


@dataclass(frozen=True)
class CouplingCalibration:
    """
    Maps incident drive power to the effective coupling rate G.

    G(P) = G_ref * sqrt(P / P_ref). The microscopic path G = g_om * x_zpf * sqrt(n_c)
    reduces to this form with P_ref = 1 mW.
    """
    p_ref_mw: float
    g_ref: float

    @classmethod
    def from_microscopic(
        cls, g_om: float, x_zpf: float, photons_per_mw: float
    ) -> "CouplingCalibration":
        """Build from g_om (rad/us per unit displacement), x_zpf and n_c per mW."""
        if photons_per_mw < 0:
            raise InvalidParameterError("photons_per_mw must be non-negative")
        return cls(p_ref_mw=1.0, g_ref=g_om * x_zpf * math.sqrt(photons_per_mw))


@dataclass(frozen=True)
class SystemParams:
    """Complete optomechanical system."""
    optical: OpticalMode
    mechanical: MechanicalMode
    calibration: CouplingCalibration
    label: str = "custom"

    @classmethod
    def from_mhz(
        cls,
        omega_m_mhz: float,
        gamma_m_mhz: float,
        kappa_mhz: float,
        kappa_ext_mhz: float | None = None,
        calibration_power_mw: float = 1.0,
        calibration_coupling_mhz: float = 0.0,
        wavelength_nm: float = 800.0,
        label: str = "custom",
    ) -> "SystemParams":
        """Ingest (omega_m, gamma_m, kappa)/2pi in MHz. kappa_ext defaults to kappa/2."""
        if kappa_ext_mhz is None:
            kappa_ext_mhz = kappa_mhz / 2.0
        return cls(
            optical=OpticalMode(
                kappa_total=mhz_to_angular(kappa_mhz),
                kappa_ext=mhz_to_angular(kappa_ext_mhz),
                wavelength_nm=wavelength_nm,
            ),
            mechanical=MechanicalMode(
                omega_m=mhz_to_angular(omega_m_mhz),
                gamma_m=mhz_to_angular(gamma_m_mhz),
            ),
            calibration=CouplingCalibration(
                p_ref_mw=calibration_power_mw,
                g_ref=mhz_to_angular(calibration_coupling_mhz),
            ),
            label=label,
        )

    # Shorthands used throughout the integrator and the closed forms
    @property
    def kappa(self) -> float:
        return self.optical.kappa_total

    @property
    def kappa_ext(self) -> float:
        return self.optical.kappa_ext

    @property
    def omega_m(self) -> float:
        return self.mechanical.omega_m

    @property
    def gamma_m(self) -> float:
        return self.mechanical.gamma_m

    def with_overrides(self, **changes) -> "SystemParams":
        """Copy with optical/mechanical fields replaced (angular units)."""
        optical = replace(
            self.optical,
            **{k: v for k, v in changes.items() if k in ("kappa_total", "kappa_ext", "wavelength_nm")},
        )
        mechanical = replace(
            self.mechanical,
            **{k: v for k, v in changes.items() if k in ("omega_m", "gamma_m")},
        )
        unknown = set(changes) - {"kappa_total", "kappa_ext", "wavelength_nm", "omega_m", "gamma_m"}
        if unknown:
            raise InvalidParameterError(f"unknown parameter override(s): {sorted(unknown)}")
        return replace(self, optical=optical, mechanical=mechanical)

    def to_mhz(self) -> dict:
        """Keyword arguments of `from_mhz` that rebuild these parameters."""
        return {
            "omega_m_mhz": angular_to_mhz(self.omega_m),
            "gamma_m_mhz": angular_to_mhz(self.gamma_m),
            "kappa_mhz": angular_to_mhz(self.kappa),
            "kappa_ext_mhz": angular_to_mhz(self.kappa_ext),
            "calibration_power_mw": self.calibration.p_ref_mw,
            "calibration_coupling_mhz": angular_to_mhz(self.calibration.g_ref),
            "wavelength_nm": self.optical.wavelength_nm,
            "label": self.label,
        }

    def describe_mhz(self) -> str:
        """'(omega_m, gamma_m, kappa)/2pi' triple formatted like the device tables."""
        return (
            f"({angular_to_mhz(self.omega_m):g}, {angular_to_mhz(self.gamma_m):g}, "
            f"{angular_to_mhz(self.kappa):g}) MHz"
        )


@dataclass(frozen=True)
class Check:
    """One line of a validation report."""
    name: str
    passed: bool
    severity: str  # "error" or "warning"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Advisory report; only positivity failures count as errors."""
    label: str
    checks: tuple[Check, ...] = field(default_factory=tuple)
    sideband_ratio: float = float("nan")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def usable(self) -> bool:
        """No positivity errors; warnings do not block a run."""
        return not self.errors

    @property
    def errors(self) -> list[Check]:
        return [c for c in self.checks if not c.passed and c.severity == "error"]

    @property
    def warnings(self) -> list[Check]:
        return [c for c in self.checks if not c.passed and c.severity == "warning"]

    def failed(self, name: str) -> bool:
        return any(c.name == name and not c.passed for c in self.checks)


# ============ Operations ============
def cooperativity(G: float, gamma_m: float, kappa: float) -> float:
    """C = 4 G^2 / (gamma_m kappa)."""
    if gamma_m <= 0 or kappa <= 0:
        raise InvalidParameterError(
            f"cooperativity needs gamma_m > 0 and kappa > 0 (got {gamma_m}, {kappa})"
        )
    return 4.0 * G * G / (gamma_m * kappa)


def optomechanical_damping(G: float, kappa: float) -> float:
    """Red-sideband induced mechanical damping, Gamma_opt = 4 G^2 / kappa."""
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be positive (got {kappa})")
    return 4.0 * G * G / kappa


def coupling_from_cooperativity(C: float, gamma_m: float, kappa: float) -> float:
    """Inverse of `cooperativity`: G = sqrt(C gamma_m kappa / 4)."""
    if C < 0:
        raise InvalidParameterError(f"cooperativity must be non-negative (got {C})")
    return math.sqrt(C * gamma_m * kappa / 4.0)


def coupling_rate_from_power(power_mw: float, cal: CouplingCalibration) -> float:
    """G(P) = G_ref * sqrt(P / P_ref) in rad/us."""
    if power_mw < 0:
        raise InvalidParameterError(f"drive power must be non-negative (got {power_mw} mW)")
    if cal.p_ref_mw <= 0:
        raise InvalidParameterError("calibration reference power must be positive")
    return cal.g_ref * math.sqrt(power_mw / cal.p_ref_mw)


def validate_params(p: SystemParams) -> ValidationReport:
    """Check positivity, the overcoupling bound and the resolved-sideband ratio."""
    kappa, kappa_ext = p.optical.kappa_total, p.optical.kappa_ext
    omega_m, gamma_m = p.mechanical.omega_m, p.mechanical.gamma_m

    sideband_ratio = omega_m / kappa if kappa > 0 else float("inf")
    quality = omega_m / gamma_m if gamma_m > 0 else float("inf")

    checks = (
        Check("kappa_positive", kappa > 0, "error", f"kappa = {kappa:.6g} rad/us"),
        Check("kappa_ext_positive", kappa_ext > 0, "error", f"kappa_ext = {kappa_ext:.6g} rad/us"),
        Check("omega_m_positive", omega_m > 0, "error", f"omega_m = {omega_m:.6g} rad/us"),
        Check("gamma_m_non_negative", gamma_m >= 0, "error", f"gamma_m = {gamma_m:.6g} rad/us"),
        Check(
            "overcoupling_bound",
            kappa_ext <= kappa,
            "warning",
            f"kappa_ext / kappa = {kappa_ext / kappa if kappa > 0 else float('inf'):.4g}",
        ),
        Check(
            "resolved_sideband",
            sideband_ratio > 1.0,
            "warning",
            f"omega_m / kappa = {sideband_ratio:.4g}",
        ),
        Check(
            "mechanical_quality",
            quality > 1e3,
            "warning",
            f"omega_m / gamma_m = {quality:.4g}",
        ),
    )
    report = ValidationReport(label=p.label, checks=checks, sideband_ratio=sideband_ratio)
    for check in report.warnings:
        logger.warning(f"{p.label}: {check.name} failed ({check.detail})")
    return report


# ============ Presets ============
SAMPLE_A = SystemParams.from_mhz(
    omega_m_mhz=160.0,
    gamma_m_mhz=0.013,
    kappa_mhz=6.0,
    calibration_power_mw=6.0,
    calibration_coupling_mhz=0.77,
    label="sample-a",
)

SAMPLE_B = SystemParams.from_mhz(
    omega_m_mhz=160.9,
    gamma_m_mhz=0.096,
    kappa_mhz=20.0,
    calibration_power_mw=1.6,
    calibration_coupling_mhz=0.45,
    label="sample-b",
)

PRESETS: dict[str, SystemParams] = {
    SAMPLE_A.label: SAMPLE_A,
    SAMPLE_B.label: SAMPLE_B,
}


def get_preset(label: str) -> SystemParams:
    """Look up a named sample preset."""
    try:
        return PRESETS[label]
    except KeyError:
        raise InvalidParameterError(
            f"unknown sample preset '{label}' (known: {', '.join(PRESETS)})"
        ) from None


__all__ = [
    "OpticalMode",
    "MechanicalMode",
    "CouplingCalibration",
    "SystemParams",
    "Check",
    "ValidationReport",
    "cooperativity",
    "optomechanical_damping",
    "coupling_from_cooperativity",
    "coupling_rate_from_power",
    "validate_params",
    "SAMPLE_A",
    "SAMPLE_B",
    "PRESETS",
    "get_preset",
    "TWO_PI",
]
