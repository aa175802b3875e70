"""Serialization of trajectories, reports and manifests."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

CSV_HEADER = ("t", "x", "g")


def _num(v):
    # 17 significant digits round-trip any float64
    return format(float(v), ".17g")


def write_trajectory_csv(traj, grid, path):
    """One row per checkpoint and cell: ``t,x,g``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        xs = [_num(x) for x in grid.x]
        for s in traj.states:
            t = _num(s.t)
            fh.writelines(f"{t},{x},{_num(g)}\n" for x, g in zip(xs, s.g))
    return path


def read_trajectory_csv(path):
    """Return ``(times, x, G)`` with ``G[k, i]`` the density at checkpoint k, cell i."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"unexpected header {rows[0]!r}")
    data = np.array(rows[1:], dtype=float)
    times = np.unique(data[:, 0])
    x = data[data[:, 0] == times[0], 1]
    G = data[:, 2].reshape(times.size, x.size)
    return times, x, G


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def write_json(obj, path):
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n")
    return path


def write_tsv(series: dict, path):
    """Plot-ready columns; every value list in ``series`` must have equal length."""
    path = Path(path)
    keys = list(series)
    cols = [list(series[k]) for k in keys]
    with path.open("w") as fh:
        fh.write("\t".join(keys) + "\n")
        for row in zip(*cols):
            fh.write("\t".join("nan" if v is None else _num(v) for v in row) + "\n")
    return path


def trajectory_summary(traj):
    return {
        "times": traj.times,
        "moments": [m.to_dict() for m in traj.moments],
        "mass_drift": traj.mass_drift,
        "step_statistics": traj.stats,
    }
