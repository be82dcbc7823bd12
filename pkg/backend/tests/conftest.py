"""
共享测试夹具 (shared fixtures)
"""
import pytest

from optostore.models.params import (
    SAMPLE_A,
    SAMPLE_B,
    CouplingCalibration,
    MechanicalMode,
    OpticalMode,
    SystemParams,
)
from optostore.services.dynamics import default_step, integrate
from optostore.services.sequence import standard_sequence
from optostore.utils.units import mhz_to_angular


@pytest.fixture
def sample_a() -> SystemParams:
    return SAMPLE_A


@pytest.fixture
def sample_b() -> SystemParams:
    return SAMPLE_B


@pytest.fixture
def lossless() -> SystemParams:
    """kappa = gamma_m = 0: a closed two-mode system."""
    return SystemParams(
        optical=OpticalMode(kappa_total=0.0, kappa_ext=0.0),
        mechanical=MechanicalMode(omega_m=mhz_to_angular(160.0), gamma_m=0.0),
        calibration=CouplingCalibration(p_ref_mw=1.0, g_ref=0.0),
        label="lossless",
    )


@pytest.fixture(scope="session")
def short_storage():
    """Sample A, fig3 timing with a 1 us delay: a cheap write/read trajectory."""
    sequence = standard_sequence("fig3", SAMPLE_A, {"delay_us": 1.0})
    t_end = sequence.end_time + 20.0 / SAMPLE_A.kappa
    dt = default_step(SAMPLE_A, sequence)
    return SAMPLE_A, sequence, integrate(sequence, SAMPLE_A, (t_end, dt))
