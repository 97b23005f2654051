"""Byte-stable CSV and JSON writers."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .dynamics import EpidemicParams, Trajectory
from .viability import CURVE_POINTS, sample_curves


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def emit_trajectory_csv(traj: Trajectory, path) -> Path:
    """``t,s,i,v`` per grid node; ``v`` is the control right after the node."""
    v = traj.node_controls()
    return _write_rows(path, ("t", "s", "i", "v"), zip(traj.times, traj.s, traj.i, v))


def emit_curves_csv(p: EpidemicParams, path, n: int = CURVE_POINTS) -> Path:
    s, g, gs = sample_curves(p, n)
    return _write_rows(path, ("s", "gamma", "gamma_star"), zip(s, g, gs))


def emit_rows_csv(rows, path) -> Path:
    """Sweep rows; missing values are written as ``nan``."""
    dicts = [r.to_dict() for r in rows]
    header = list(dicts[0]) if dicts else []
    path = Path(path)
    lines = [",".join(header)]
    for d in dicts:
        cells = []
        for k in header:
            val = d[k]
            if isinstance(val, str):
                cells.append(val)
            else:
                cells.append(fmt(math.nan if val is None else val))
        lines.append(",".join(cells))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(obj), indent=2) + "\n")
    return path
