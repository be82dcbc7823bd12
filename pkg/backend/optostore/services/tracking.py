"""
Optional mlflow experiment tracking for runs.
"""
from collections.abc import Mapping
import logging
import math
from pathlib import Path
from typing import Any

import mlflow

from ..config import settings
from ..models.schemas import RunConfig

logger = logging.getLogger(__name__)


def flatten(data: Any, prefix: str = "") -> dict[str, Any]:
    """Nested mappings/lists -> {'a.b.0.c': leaf}."""
    items: dict[str, Any] = {}
    if isinstance(data, Mapping):
        for key, value in data.items():
            items.update(flatten(value, f"{prefix}{key}."))
    elif isinstance(data, (list, tuple)):
        for i, value in enumerate(data):
            items.update(flatten(value, f"{prefix}{i}."))
    else:
        items[prefix.rstrip(".")] = data
    return items


def numeric_metrics(summary: Mapping[str, Any]) -> dict[str, float]:
    """Every finite numeric leaf of the summary (booleans excluded)."""
    metrics = {}
    for key, value in flatten(summary).items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            continue
        if math.isfinite(value):
            metrics[key] = float(value)
    return metrics


def log_run(cfg: RunConfig, summary: Mapping[str, Any], out_dir: Path | None = None) -> str:
    """Log config as params, summary numbers as metrics and the output files as artifacts."""
    mlflow.set_tracking_uri(settings.MLFLOW_TRACKING_URI)
    mlflow.set_experiment(settings.MLFLOW_EXPERIMENT_NAME)
    with mlflow.start_run(run_name=f"{cfg.scenario}-{summary['sample']}") as run:
        params = {k: str(v) for k, v in flatten(cfg.model_dump(exclude_none=True)).items()}
        mlflow.log_params(params)
        mlflow.log_metrics(numeric_metrics(summary))
        if out_dir is not None:
            mlflow.log_artifacts(str(out_dir))
        logger.info(f"✅ Tracked run {run.info.run_id} in {settings.MLFLOW_TRACKING_URI}")
        return run.info.run_id


__all__ = ["flatten", "numeric_metrics", "log_run"]
