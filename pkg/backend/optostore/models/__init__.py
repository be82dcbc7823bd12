"""Models package"""
from .params import PRESETS, SAMPLE_A, SAMPLE_B, SystemParams, get_preset, validate_params
from .schemas import (
    SCENARIOS,
    HealthResponse,
    PresetInfo,
    PresetsResponse,
    RunConfig,
    RunResponse,
    ValidationResponse,
)

__all__ = [
    "PRESETS",
    "SAMPLE_A",
    "SAMPLE_B",
    "SystemParams",
    "get_preset",
    "validate_params",
    "SCENARIOS",
    "HealthResponse",
    "PresetInfo",
    "PresetsResponse",
    "RunConfig",
    "RunResponse",
    "ValidationResponse",
]
