"""CSV and JSON writers with embedded provenance.

Numbers are written with 17 significant digits so doubles round-trip.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = [f"# {k}: {v}" for k, v in _provenance(meta).items()]
    lines.append(",".join(header))
    if rows.size:
        if rows.shape[1] != len(header):
            raise ValueError("row width does not match header")
        lines.extend(",".join(fmt(x) for x in r) for r in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Returns ``(meta, header, rows)``."""
    meta, header, rows = {}, None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    return meta, header, np.array(rows).reshape(-1, len(header))


def _provenance(meta):
    out = {"wsmorse_version": __version__}
    out.update(meta)
    return out


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps_json(obj, meta: dict) -> str:
    payload = dict(_provenance(meta))
    payload.update(_clean(obj))
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path, obj, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj, meta))
    return path
