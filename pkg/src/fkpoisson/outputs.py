"""Deterministic JSON/CSV writers.

Result files carry the config hash and seed and nothing run-dependent, so two
runs of one config produce byte-identical files.  Timestamps and host details
go to ``metadata.json`` only.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from pathlib import Path

import numpy as np

__all__ = ["clean", "write_json", "write_csv", "read_csv", "update_metadata"]


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "to_dict"):
        return clean(obj.to_dict())
    return obj


def write_json(path: Path, payload: dict, stamp: dict) -> None:
    body = {**stamp, **clean(payload)}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else "nan"
    return str(v)


def write_csv(path: Path, header, rows, stamp: dict) -> None:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in sorted(stamp.items())) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def read_csv(path: Path) -> tuple:
    """``(header, rows as float arrays or strings)``, skipping ``#`` lines."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rdr = csv.reader(lines)
    header = next(rdr)
    return header, [row for row in rdr]


def update_metadata(directory: Path, command: str, info: dict) -> None:
    path = directory / "metadata.json"
    meta = json.loads(path.read_text()) if path.exists() else {}
    meta[command] = {
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "host": platform.node(),
        **clean(info),
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
