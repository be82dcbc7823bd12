"""
Simulate Router - API endpoints for presets, config validation and runs
"""
import logging

from fastapi import APIRouter, HTTPException

from ..exceptions import ConfigError, InvalidSequenceError, OptostoreError
from ..models import (
    PRESETS,
    SCENARIOS,
    PresetInfo,
    PresetsResponse,
    RunConfig,
    RunResponse,
    ValidationResponse,
)
from ..models.schemas import CheckInfo
from ..services.runner import check_params, execute, scenario_sequence
from ..utils.io import to_jsonable
from ..utils.units import angular_to_mhz

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/simulate", tags=["Simulate"])


@router.get("/presets", response_model=PresetsResponse)
async def presets():
    """List sample presets and scenario kinds."""
    samples = [
        PresetInfo(
            label=label,
            description=p.describe_mhz(),
            omega_m_mhz=angular_to_mhz(p.omega_m),
            gamma_m_mhz=angular_to_mhz(p.gamma_m),
            kappa_mhz=angular_to_mhz(p.kappa),
            kappa_ext_mhz=angular_to_mhz(p.kappa_ext),
        )
        for label, p in PRESETS.items()
    ]
    return PresetsResponse(samples=samples, scenarios=list(SCENARIOS))


@router.post("/validate", response_model=ValidationResponse)
async def validate(config: RunConfig):
    """
    Check a run configuration without running it.

    Schema violations are rejected with 422 before this handler runs.
    """
    try:
        params, report = check_params(config)
        scenario_sequence(config, params)
    except (ConfigError, InvalidSequenceError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    return ValidationResponse(
        valid=report.usable,
        passed=report.passed,
        label=report.label,
        sideband_ratio=report.sideband_ratio,
        checks=[
            CheckInfo(name=c.name, passed=c.passed, severity=c.severity, detail=c.detail)
            for c in report.checks
        ],
    )


@router.post("/run", response_model=RunResponse)
def run(config: RunConfig):
    """
    Run a scenario and return its summary (no files are written).

    - **sample**: sample preset, or **params** for explicit values
    - **scenario**: fig3, fig4, fig5-omit, fig5-storage or storage-delay
    """
    logger.info(f"Run request: scenario={config.scenario}, sample={config.sample}")
    try:
        output = execute(config)
    except (ConfigError, InvalidSequenceError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except OptostoreError as e:
        logger.error(f"❌ Run failed: {e}")
        raise HTTPException(status_code=500, detail=f"Simulation error: {str(e)}")
    return RunResponse(summary=to_jsonable(output.summary))
