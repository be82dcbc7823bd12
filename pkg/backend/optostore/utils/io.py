"""
Artifact rendering: CSV tables, the JSON summary and an optional gnuplot stub.

Everything is rendered to bytes first so that digests can go into the summary and nothing
touches the disk until the whole run has succeeded.
"""
from collections.abc import Mapping
import io
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import xxhash

from ..exceptions import ConfigError

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.10e"


def render_csv(columns: Mapping[str, np.ndarray]) -> bytes:
    """Comma-separated table with a header row; fixed float format for byte-stable output."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    buffer = io.StringIO()
    np.savetxt(buffer, data, delimiter=",", header=",".join(names), comments="", fmt=CSV_FORMAT)
    return buffer.getvalue().encode()


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, Mapping):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_jsonable(summary: Mapping[str, Any]) -> dict[str, Any]:
    return _clean(summary)


def render_json(summary: Mapping[str, Any]) -> bytes:
    return (json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n").encode()


def digest(data: bytes) -> str:
    return xxhash.xxh64_hexdigest(data)


def render_gnuplot(tables: Mapping[str, list[str]]) -> bytes:
    """Script stub plotting the second column of every CSV against the first."""
    lines = ["set datafile separator ','", "set key autotitle columnhead", ""]
    for filename, columns in tables.items():
        lines.append(f"set xlabel '{columns[0]}'")
        lines.append(f"set ylabel '{columns[1]}'")
        lines.append(f"plot '{filename}' using 1:2 with lines")
        lines.append("pause -1")
        lines.append("")
    return "\n".join(lines).encode()


def write_artifacts(out_dir: Path, artifacts: Mapping[str, bytes], force: bool = False) -> list[Path]:
    """Write every artifact, refusing to overwrite existing files unless force is set."""
    targets = [out_dir / name for name in artifacts]
    existing = [p for p in targets if p.exists()]
    if existing and not force:
        raise ConfigError(
            f"refusing to overwrite {', '.join(str(p) for p in existing)} (use --force)"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, data in zip(targets, artifacts.values()):
        path.write_bytes(data)
        logger.debug(f"Wrote {path} ({len(data)} bytes)")
    return targets


__all__ = [
    "render_csv",
    "render_json",
    "render_gnuplot",
    "to_jsonable",
    "digest",
    "write_artifacts",
]
