"""The five figure kinds regenerated from sweep output.

curves2d   planar solution curves t -> (U, V)
volume     volume growth t -> sqrt(-lambda)
curves3d   space curves t -> (U, V, W)
down-axis  projection of the space curves onto the plane orthogonal to the
           diagonal direction (1,1,1)
planar-abc down-axis projection restricted to trajectories with two equal
           velocity components above the distinguished diagonal value
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import EmptyInput, SchemaMismatch  # noqa: E402
from .reader import load_run  # noqa: E402

KINDS = ("curves2d", "volume", "curves3d", "down-axis", "planar-abc")

#: diagonal velocity separating the two planar solution classes
NU = -(3.0 ** (1.0 / 6.0)) / 2.0 ** (1.0 / 3.0)


@dataclass
class PlotSpec:
    in_dir: str
    kind: str
    out_path: str
    stride: int = 1
    dpi: int = 150

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"choose from {KINDS}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        return self


def _colors(trajs):
    """Color curves by the squared norm of the initial velocity."""
    vals = np.array([tr.velocity_norm_sq for tr in trajs])
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo if hi > lo else 1.0
    cmap = matplotlib.colormaps["viridis"]
    return [cmap((v - lo) / span) for v in vals]


def _down_axis_coords(U, V, W):
    """Orthonormal coordinates in the plane orthogonal to (1,1,1)."""
    u = (U - V) / math.sqrt(2.0)
    v = (U + V - 2.0 * W) / math.sqrt(6.0)
    return u, v


def _uvw(tr, stride):
    if "W" in tr.columns:
        U, V, W = tr.need("U", "V", "W")
    else:
        # planar family: the doubled coordinate comes first
        U, W = tr.need("U", "V")
        V = U
    return U[::stride], V[::stride], W[::stride]


def render(spec: PlotSpec) -> str:
    """Render one figure; returns the output path."""
    spec.validate()
    _, trajs = load_run(spec.in_dir)
    colors = _colors(trajs)
    s = spec.stride
    if spec.kind == "curves2d":
        fig, ax = plt.subplots(figsize=(6, 6))
        for tr, col in zip(trajs, colors):
            U, V = tr.need("U", "V")
            ax.plot(U[::s], V[::s], lw=0.7, color=col)
        ax.set_xlabel("U")
        ax.set_ylabel("V")
        ax.set_title("planar solution curves")
    elif spec.kind == "volume":
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for tr, col in zip(trajs, colors):
            t, vol = tr.need("t", "sqrt_neg_lambda")
            order = np.argsort(t)
            ax.plot(t[order][::s], vol[order][::s], lw=0.7, color=col)
        ax.set_xlabel("t")
        ax.set_ylabel("volume growth")
    elif spec.kind == "curves3d":
        fig = plt.figure(figsize=(7, 6))
        ax = fig.add_subplot(projection="3d")
        for tr, col in zip(trajs, colors):
            U, V, W = _uvw(tr, s)
            ax.plot(U, V, W, lw=0.6, color=col)
        ax.set_xlabel("U")
        ax.set_ylabel("V")
        ax.set_zlabel("W")
    elif spec.kind in ("down-axis", "planar-abc"):
        if spec.kind == "planar-abc":
            trajs, colors = _planar_subset(trajs, colors)
            if not trajs:
                raise EmptyInput("no planar trajectories with the doubled "
                                 "velocity component above the diagonal value")
        fig, ax = plt.subplots(figsize=(6, 6))
        lim = 0.0
        for tr, col in zip(trajs, colors):
            U, V, W = _uvw(tr, s)
            u, v = _down_axis_coords(U, V, W)
            ax.plot(u, v, lw=0.6, color=col)
            lim = max(lim, float(np.abs(u).max()), float(np.abs(v).max()))
        # square, frameless, centred canvas: the image is equivariant under
        # the threefold coordinate permutation acting as a rotation
        lim *= 1.3
        ax.set_xlim(-lim, lim)
        ax.set_ylim(-lim, lim)
        ax.set_aspect(1.0)
        ax.set_axis_off()
        fig.subplots_adjust(left=0.0, right=1.0, bottom=0.0, top=1.0)
    else:  # pragma: no cover
        raise ValueError(spec.kind)
    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return spec.out_path


def _planar_subset(trajs, colors):
    keep, kept_cols = [], []
    for tr, col in zip(trajs, colors):
        vel = tr.velocity
        doubled = None
        if len(vel) == 2:
            doubled = vel[0]
        elif len(vel) == 3:
            for i in range(3):
                for j in range(i + 1, 3):
                    if abs(vel[i] - vel[j]) < 1e-9:
                        doubled = vel[i]
        if doubled is not None and NU < doubled < 0.0:
            keep.append(tr)
            kept_cols.append(col)
    return keep, kept_cols
