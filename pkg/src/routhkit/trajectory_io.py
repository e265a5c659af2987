"""Trajectory serialization: CSV with a commented metadata preamble.

Layout: '#' metadata lines (key = JSON value), one header row with column
names (t first, then state components in declaration order), then one row
per sample at 17 significant digits, which round-trips IEEE doubles
exactly.  The '#' preamble keeps the files gnuplot-friendly.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import List, Tuple

import numpy as np

from .errors import ConfigError
from .integrate import Trajectory, TrajectoryMeta
from .reduction import MomentumValue


def write_trajectory_csv(path: str, traj: Trajectory, labels: List[str]) -> None:
    """Write a trajectory atomically (temp file + rename in the target dir)."""
    if len(labels) != traj.states.shape[1]:
        raise ValueError(
            f"{len(labels)} labels for {traj.states.shape[1]} state columns"
        )
    meta = traj.meta
    lines = [f"# system = {json.dumps(meta.system)}",
             f"# chart = {json.dumps(meta.chart)}"]
    if meta.energy0 is not None:
        lines.append(f"# energy0 = {json.dumps(meta.energy0)}")
    if meta.momentum is not None:
        lines.append(f"# momentum_xi = {json.dumps([float(v) for v in meta.momentum.xi])}")
        lines.append(f"# momentum_eta = {json.dumps([float(v) for v in meta.momentum.eta])}")
    lines.append(",".join(["t"] + list(labels)))
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(f"{v:.17g}" for v in np.concatenate([[t], row])))
    payload = "\n".join(lines) + "\n"

    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trajectory_csv(path: str) -> Tuple[Trajectory, List[str]]:
    """Read a trajectory written by :func:`write_trajectory_csv`."""
    meta_kv = {}
    header = None
    rows = []
    with open(path, "r") as handle:
        for raw in handle:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta_kv[key.strip()] = json.loads(value.strip())
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(c) for c in line.split(",")])
    if header is None or len(rows) < 2:
        raise ConfigError(f"{path}: not a trajectory file (need header and >= 2 rows)")
    data = np.asarray(rows, dtype=float)
    momentum = None
    if "momentum_xi" in meta_kv or "momentum_eta" in meta_kv:
        momentum = MomentumValue(xi=np.asarray(meta_kv.get("momentum_xi", []), dtype=float),
                                 eta=np.asarray(meta_kv.get("momentum_eta", []), dtype=float))
    meta = TrajectoryMeta(system=meta_kv.get("system", ""),
                          momentum=momentum,
                          chart=meta_kv.get("chart", ""),
                          energy0=meta_kv.get("energy0"))
    traj = Trajectory(times=data[:, 0], states=data[:, 1:], meta=meta)
    return traj, header[1:]
