"""Load sweep output (manifest + trajectory CSVs) into plain arrays.

This package talks to the solver only through its files: manifest.json and
RFC-4180 trajectory CSVs whose header names the columns.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, SchemaMismatch


@dataclass
class TrajectoryData:
    index: int
    columns: dict                     # name -> float array
    velocity: list
    velocity_norm_sq: float
    meta: dict = field(default_factory=dict)

    def need(self, *names) -> list:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaMismatch(
                f"trajectory {self.index} lacks columns {missing}; "
                f"has {sorted(self.columns)}")
        return [self.columns[n] for n in names]


def load_run(in_dir: str):
    """Read the manifest and every referenced trajectory CSV."""
    man_path = os.path.join(in_dir, "manifest.json")
    if not os.path.isdir(in_dir) or not os.path.exists(man_path):
        raise EmptyInput(f"no manifest.json in {in_dir!r}")
    with open(man_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    records = manifest.get("trajectories", [])
    out = []
    for rec in records:
        path = os.path.join(in_dir, rec["csv"])
        if not os.path.exists(path):
            continue
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            continue
        header = rows[0]
        data = {}
        for j, name in enumerate(header):
            if name == "termination_reason":
                continue
            try:
                data[name] = np.array([float(r[j]) for r in rows[1:]])
            except ValueError:
                continue
        vel = rec.get("velocity", [])
        out.append(TrajectoryData(
            index=rec.get("index", len(out)),
            columns=data,
            velocity=vel,
            velocity_norm_sq=float(rec.get("velocity_norm_sq",
                                           sum(v * v for v in vel))),
            meta=rec))
    if not out:
        raise EmptyInput(f"no trajectory CSVs under {in_dir!r}")
    return manifest, out
