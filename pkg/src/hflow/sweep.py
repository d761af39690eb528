"""Batch sweeps over normalized initial data, with deterministic CSV output.

A sweep launches one trajectory per mesh point of the normalization
surface, runs them over a worker pool in a fixed task order, and writes one
CSV per trajectory plus a JSON manifest.  Output is byte-identical for any
worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import flow
from .flow import AnsatzKind, AnsatzState

SQRT3 = math.sqrt(3.0)

#: CSV column names for the reduced coordinates of each ansatz
COORD_COLUMNS = {
    AnsatzKind.TWO: ["U", "V", "pU", "pV"],
    AnsatzKind.THREE: ["U", "V", "W", "pU", "pV", "pW"],
    AnsatzKind.SIX: ["q1", "q2", "q3", "p1", "p2", "p3"],
    AnsatzKind.TRIAXIAL: ["a1", "b1", "a2", "b2", "a3", "b3"],
    AnsatzKind.GENERAL: [f"q{i}{j}" for i in range(4) for j in range(i, 4)]
                        + [f"p{i}{j}" for i in range(4) for j in range(i, 4)],
}

DIAG_COLUMNS = ["lambda", "sqrt_neg_lambda", "H_residual", "comm_norm",
                "scalar_curv", "min_metric_eig", "termination_reason"]


def csv_header(kind: AnsatzKind) -> list:
    return ["t"] + COORD_COLUMNS[kind] + DIAG_COLUMNS


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def trajectory_to_csv(traj, reason: str | None = None) -> str:
    """Render one trajectory (RFC 4180, 17 significant digits); the
    termination reason appears in the final row only."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(csv_header(traj.kind))
    reason = traj.termination if reason is None else reason
    n = traj.n_samples
    for i in range(n):
        row = [_fmt(traj.times[i])]
        row += [_fmt(v) for v in traj.coords[i]]
        row += [_fmt(traj.lam[i]), _fmt(traj.sqrt_neg_lam[i]),
                _fmt(traj.hamiltonian[i]), _fmt(traj.comm_norm[i]),
                _fmt(traj.scalar_curv[i]), _fmt(traj.min_metric_eig[i]),
                reason if i == n - 1 else ""]
        w.writerow(row)
    return buf.getvalue()


def merged_csv(traj_neg, traj_pos) -> str:
    """Merge a backward and a forward leg launched from the same state into
    one time-ascending CSV."""
    if traj_neg is None:
        return trajectory_to_csv(traj_pos, f"pos:{traj_pos.termination}")
    if traj_pos is None:
        rev = _reversed_rows(traj_neg)
        return _rows_to_csv(traj_neg.kind, rev, f"neg:{traj_neg.termination}")
    rows = _reversed_rows(traj_neg) + _forward_rows(traj_pos)[1:]
    return _rows_to_csv(traj_neg.kind,
                        rows, f"neg:{traj_neg.termination};pos:{traj_pos.termination}")


def _forward_rows(traj):
    return [[traj.times[i], *traj.coords[i], traj.lam[i], traj.sqrt_neg_lam[i],
             traj.hamiltonian[i], traj.comm_norm[i], traj.scalar_curv[i],
             traj.min_metric_eig[i]] for i in range(traj.n_samples)]


def _reversed_rows(traj):
    return _forward_rows(traj)[::-1]


def _rows_to_csv(kind, rows, reason: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(csv_header(kind))
    for i, row in enumerate(rows):
        w.writerow([_fmt(v) for v in row] + [reason if i == len(rows) - 1 else ""])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# mesh over the normalization surface

def mesh_T(resolution: int, halfwidth: float = 0.9):
    """Velocity mesh on the all-negative component of the cubic constraint
    surface (x+y)(x+z)(y+z) = -4*sqrt(3).

    The (x, y) grid is centred on the distinguished diagonal velocity so
    that odd resolutions contain it exactly; z is the negative root of the
    induced quadratic, and points whose root fails the branch conditions
    are discarded.  Every returned triple satisfies the constraint to
    1e-12.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    nu = flow.nk_velocity()
    axis = np.linspace(nu - halfwidth, nu + halfwidth, resolution) \
        if resolution > 1 else np.array([nu])
    out = []
    for x in axis:
        for y in axis:
            S = x + y
            if S >= 0.0:
                continue
            c2 = x * y + 4.0 * SQRT3 / S
            if c2 >= 0.0:
                continue
            disc = S * S - 4.0 * c2
            z = 0.5 * (-S - math.sqrt(disc))
            # one Newton polish on the cubic keeps the residual at rounding level
            for _ in range(2):
                f = (x + y) * (x + z) * (y + z) + 4.0 * SQRT3
                df = (x + y) * (x + y + 2.0 * z)
                if df != 0.0:
                    z -= f / df
            if z >= 0.0 or x + z >= 0.0 or y + z >= 0.0:
                continue
            if abs((x + y) * (x + z) * (y + z) + 4.0 * SQRT3) > 1e-12:
                continue
            out.append((float(x), float(y), float(z)))
    return out


def two_function_mesh(n: int, x_min: float = -1.9, x_max: float = -0.08):
    """Velocities (x, y) on the positive-definite branch of the planar
    normalization curve."""
    xs = np.linspace(x_min, x_max, n) if n > 1 else np.array([x_min])
    return [(float(x), flow.two_function_curve_y(float(x))) for x in xs]


# ---------------------------------------------------------------------------
# sweep configuration and execution

@dataclass
class SweepConfig:
    ansatz: str = "three"
    a: float = 0.0
    b: float = 0.0
    resolution: int = 10
    t0: float = -0.97
    t1: float = 0.0
    step: float = 1e-3
    adaptive: bool = False
    sample_every: int = 10
    workers: int = 1
    out_dir: str = "sweep_out"
    x_min: float = -1.9
    x_max: float = -0.08
    compute_scalar: bool = True
    eps_stab: float = 1e-8
    drift_budget: float = 1e-6
    halfwidth: float = 0.9

    def validate(self):
        if self.t0 > 0.0 or self.t1 < 0.0 or self.t0 == self.t1:
            raise ValueError("sweep range must satisfy t0 <= 0 <= t1, t0 != t1")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if self.ansatz not in ("two", "three"):
            raise ValueError("sweeps support the two- and three-function families")
        if self.ansatz in ("two", "three") and (self.a, self.b) != (0.0, 0.0):
            raise ValueError("two-/three-function sweeps require class (0, 0)")
        return self


_WORKER_CFG: SweepConfig | None = None
_WORKER_TASKS = None


def _init_worker(cfg, tasks):
    global _WORKER_CFG, _WORKER_TASKS
    _WORKER_CFG = cfg
    _WORKER_TASKS = tasks


def _integrate_leg(state, t_end, cfg):
    return flow.integrate(
        state, t_end, step=cfg.step, adaptive=cfg.adaptive,
        sample_every=cfg.sample_every, eps_stab=cfg.eps_stab,
        drift_budget=cfg.drift_budget, compute_scalar=cfg.compute_scalar)


def run_task(index: int, velocity, cfg: SweepConfig):
    """Integrate the two legs of one sweep trajectory; pure function."""
    if cfg.ansatz == "three":
        state = flow.init_three_function(*velocity)
    else:
        state = flow.init_two_function(*velocity)
    neg = pos = None
    if cfg.t0 < 0.0:
        neg = _integrate_leg(state, cfg.t0, cfg)
    if cfg.t1 > 0.0:
        pos = _integrate_leg(state, cfg.t1, cfg)
    csv_text = merged_csv(neg, pos)
    record = {
        "index": index,
        "csv": f"traj_{index:05d}.csv",
        "ansatz": cfg.ansatz,
        "class": [cfg.a, cfg.b],
        "velocity": list(velocity),
        "velocity_norm_sq": float(sum(v * v for v in velocity)),
    }
    for leg, tag in ((neg, "neg"), (pos, "pos")):
        if leg is None:
            continue
        record[f"termination_{tag}"] = leg.termination
        record[f"raw_termination_{tag}"] = leg.meta.get("raw_termination")
        record[f"t_final_{tag}"] = leg.t_final
        if leg.termination == "DegenerateStructure":
            record[f"singular_time_estimate_{tag}"] = leg.t_final
    record["completed"] = all(
        leg is None or leg.termination == "Completed" for leg in (neg, pos))
    return index, csv_text, record


def _pool_task(index):
    return run_task(index, _WORKER_TASKS[index], _WORKER_CFG)


def run_sweep(cfg: SweepConfig) -> dict:
    """Run a sweep and write traj_*.csv, manifest.json, summary.json."""
    cfg.validate()
    if cfg.ansatz == "three":
        tasks = mesh_T(cfg.resolution, cfg.halfwidth)
    else:
        tasks = two_function_mesh(cfg.resolution, cfg.x_min, cfg.x_max)
    os.makedirs(cfg.out_dir, exist_ok=True)
    t_start = time.perf_counter()
    results = []
    if cfg.workers <= 1:
        for i in range(len(tasks)):
            results.append(run_task(i, tasks[i], cfg))
    else:
        with multiprocessing.Pool(cfg.workers, initializer=_init_worker,
                                  initargs=(cfg, tasks)) as pool:
            for res in pool.imap(_pool_task, range(len(tasks)), chunksize=1):
                results.append(res)
    # merge in index order: results from imap arrive ordered already
    records = []
    for index, csv_text, record in results:
        with open(os.path.join(cfg.out_dir, record["csv"]), "w",
                  encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
        records.append(record)
    wall = time.perf_counter() - t_start
    manifest = {
        "tool": "hflow",
        "version": _version(),
        "config": asdict(cfg),
        "n_trajectories": len(records),
        "wallclock_s": wall,
        "trajectories": records,
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    summary = summarize(records)
    with open(os.path.join(cfg.out_dir, "summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return manifest


def summarize(records) -> dict:
    """Aggregate termination statistics, in particular singular times."""
    reasons = {}
    sing = []
    for rec in records:
        for tag in ("neg", "pos"):
            r = rec.get(f"termination_{tag}")
            if r is None:
                continue
            reasons[f"{tag}:{r}"] = reasons.get(f"{tag}:{r}", 0) + 1
            st = rec.get(f"singular_time_estimate_{tag}")
            if st is not None:
                sing.append(st)
    out = {"n": len(records), "terminations": reasons,
           "n_degenerate": len(sing)}
    if sing:
        arr = np.asarray(sorted(sing))
        out["singular_time_min"] = float(arr[0])
        out["singular_time_median"] = float(np.median(arr))
        out["singular_time_max"] = float(arr[-1])
    return out


def _version() -> str:
    from . import __version__
    return __version__
