"""Curvature of left-invariant metrics and cohomogeneity-one quantities.

Brackets are derived once from the exterior derivative via
e([X, Y]) = -de(X, Y); curvature is evaluated by the Koszul formula in an
orthonormalized frame, so everything stays finite-dimensional linear
algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import forms6
from .errors import (NonPositiveMetricFunctions, NotPositiveDefinite,
                     SingularMetric)


@dataclass(frozen=True)
class MetricTensor:
    """Symmetric 6x6 matrix in the invariant coframe, with a definiteness flag."""

    g: np.ndarray
    definite: bool = True
    min_eig: float = field(default=float("nan"))
    asymmetry: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (6, 6):
            raise ValueError("metric must be 6x6")
        object.__setattr__(self, "g", 0.5 * (g + g.T))

    @property
    def matrix(self) -> np.ndarray:
        return self.g

    def det(self) -> float:
        return float(np.linalg.det(self.g))


def _as_matrix(g) -> np.ndarray:
    if isinstance(g, MetricTensor):
        return g.g
    return np.asarray(g, dtype=float)


def _brackets() -> np.ndarray:
    """Structure tensor C[i, j, k]: [X_i, X_j] = sum_k C[i, j, k] X_k."""
    C = np.zeros((6, 6, 6))
    for k in range(6):
        de = forms6.ext_d(forms6.Form.basis(k + 1))
        for pos, (i, j) in enumerate(forms6.INDICES[2]):
            c = de.coeffs[pos]
            if c != 0.0:
                C[i - 1, j - 1, k] = -c
                C[j - 1, i - 1, k] = c
    return C


BRACKETS = _brackets()


def ricci_scalar(g) -> float:
    """Scalar curvature of the left-invariant metric with Gram matrix g.

    The frame is orthonormalized by a Cholesky factor and the Levi-Civita
    connection assembled from the Koszul formula.
    """
    G = _as_matrix(g)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("metric is not positive definite")
    M = np.linalg.inv(L).T          # columns: orthonormal frame in the X basis
    # c[a,b,c] = <[F_a, F_b], F_c> with X_i = sum_a L[i,a] F_a
    X = np.tensordot(BRACKETS, L, axes=([2], [0]))      # (i, j, c)
    Y = np.tensordot(M, X, axes=([0], [0]))             # (a, j, c)
    c = np.transpose(np.tensordot(M, Y, axes=([0], [1])), (1, 0, 2))
    # Koszul: 2<nab_a F_b, F_c> = c_abc - c_bca + c_cab
    gamma = 0.5 * (c - np.transpose(c, (2, 0, 1)) + np.transpose(c, (1, 2, 0)))
    t1 = float(np.einsum("jjm->m", gamma) @ np.einsum("imi->m", gamma))
    t2 = np.einsum("ijm,jmi->", gamma, gamma)
    t3 = np.einsum("ijm,mji->", c, gamma)
    return float(t1 - t2 - t3)


@dataclass(frozen=True)
class ShapeData:
    """Shape operator of a principal orbit plus the traces entering the
    cohomogeneity-one conservation law."""

    L: np.ndarray
    trL: float
    trL2: float
    scalar: float


def shape_operator(g, gprime) -> ShapeData:
    """L = (1/2) g^-1 g' for a metric path, with tr L, tr L^2 and the scalar
    curvature of g."""
    G = _as_matrix(g)
    Gp = _as_matrix(gprime)
    try:
        L = 0.5 * np.linalg.solve(G, Gp)
    except np.linalg.LinAlgError:
        raise SingularMetric("metric not invertible")
    return ShapeData(L=L, trL=float(np.trace(L)), trL2=float(np.trace(L @ L)),
                     scalar=ricci_scalar(G))


def conservation_value(g, gprime) -> float:
    """(tr L)^2 - tr(L^2) - scalar; vanishes along solutions of the flow."""
    sd = shape_operator(g, gprime)
    return sd.trL ** 2 - sd.trL2 - sd.scalar


def conservation_residual(traj) -> np.ndarray:
    """Per-sample conservation-law value along a trajectory."""
    out = np.empty(traj.n_samples)
    for i in range(traj.n_samples):
        g, gp = traj.metric_and_derivative(i)
        out[i] = conservation_value(g, gp)
    return out


def cohom1_energies(g, gprime):
    """Kinetic and potential terms (T, V) of the cohomogeneity-one Lagrangian."""
    G = _as_matrix(g)
    sd = shape_operator(G, gprime)
    root = np.sqrt(np.linalg.det(G))
    T = (sd.trL ** 2 - sd.trL2) * root
    V = -sd.scalar * root
    return float(T), float(V)


# ---------------------------------------------------------------------------
# metric builders for the reduced families

def diag_metric(q, p, a: float, b: float) -> np.ndarray:
    """Metric of the diagonal family from 3x3-side coordinates (q_i, p_i).

    Valid on normalized states; the result is block diagonal over the three
    coframe pairs.
    """
    q1, q2, q3 = q
    p1, p2, p3 = p
    g = np.zeros((6, 6))
    blocks = (
        (0, p2 * p3, q2 * q3 + a * q1, q2 * q3 - b * q1, q1 * q1 - q2 * q2 - q3 * q3 - a * b),
        (2, p1 * p3, q1 * q3 + a * q2, q1 * q3 - b * q2, q2 * q2 - q1 * q1 - q3 * q3 - a * b),
        (4, p1 * p2, q1 * q2 + a * q3, q1 * q2 - b * q3, q3 * q3 - q1 * q1 - q2 * q2 - a * b),
    )
    for off, den, dd, ee, cross in blocks:
        g[off, off] = dd / den
        g[off + 1, off + 1] = ee / den
        g[off, off + 1] = g[off + 1, off] = cross / (2.0 * den)
    return g


def triaxial_metric(a_i, b_i) -> np.ndarray:
    """Metric sum a_i^2 (e- x e-) + b_i^2 (e+ x e+) over the coframe pairs."""
    g = np.zeros((6, 6))
    for i in range(3):
        aa, bb = a_i[i] ** 2, b_i[i] ** 2
        off = 2 * i
        g[off, off] = g[off + 1, off + 1] = aa + bb
        g[off, off + 1] = g[off + 1, off] = bb - aa
    return g


def triaxial_functions_from_metric(g):
    """Extract (a_i, b_i) > 0 from a block metric of triaxial shape."""
    G = _as_matrix(g)
    a_i, b_i = np.empty(3), np.empty(3)
    for i in range(3):
        off = 2 * i
        diag = 0.5 * (G[off, off] + G[off + 1, off + 1])
        cross = G[off, off + 1]
        aa = 0.5 * (diag - cross)
        bb = 0.5 * (diag + cross)
        if aa <= 0.0 or bb <= 0.0:
            raise NonPositiveMetricFunctions(
                f"pair {i + 1}: a^2 = {aa:.3g}, b^2 = {bb:.3g}")
        a_i[i] = np.sqrt(aa)
        b_i[i] = np.sqrt(bb)
    return a_i, b_i


def triaxial_scalar_formula(a: float, b: float, a3: float, b3: float) -> float:
    """Closed-form scalar curvature of the a1=a2, b1=b2 triaxial metric."""
    num = (2 * a3 ** 4 * a ** 2 * b ** 2 + a3 ** 2 * a ** 4 * b3 ** 2
           - 8 * a ** 4 * b ** 2 * a3 ** 2 + a3 ** 2 * b ** 4 * b3 ** 2
           - 8 * b ** 4 * a ** 2 * a3 ** 2 + 2 * a ** 6 * b ** 2
           - 4 * a ** 4 * b ** 4 + 2 * a ** 2 * b ** 6)
    return -0.125 * num / (a ** 4 * b ** 4 * a3 ** 2)


# ---------------------------------------------------------------------------
# superpotential of the a1=a2, b1=b2 family

#: constant coupling matrix in the log variables (ln a, ln b, ln b3, ln a3)
G_COUPLING = np.array([
    [2.0, 4.0, 2.0, 2.0],
    [4.0, 2.0, 2.0, 2.0],
    [2.0, 2.0, 0.0, 1.0],
    [2.0, 2.0, 1.0, 0.0],
])

_G_INV = np.linalg.inv(G_COUPLING)


def superpotential_u(a: float, b: float, a3: float, b3: float) -> float:
    return 2.0 * (2 * a ** 3 * b * b3 + 2 * a * b ** 3 * b3 - a ** 2 * a3 * b3 ** 2
                  + b ** 2 * a3 * b3 ** 2 + 2 * a * b * a3 ** 2 * b3)


def superpotential_grad_log(a: float, b: float, a3: float, b3: float) -> np.ndarray:
    """du/d(ln a), du/d(ln b), du/d(ln b3), du/d(ln a3)."""
    du_da = 2.0 * (6 * a ** 2 * b * b3 + 2 * b ** 3 * b3 - 2 * a * a3 * b3 ** 2
                   + 2 * b * a3 ** 2 * b3)
    du_db = 2.0 * (2 * a ** 3 * b3 + 6 * a * b ** 2 * b3 + 2 * b * a3 * b3 ** 2
                   + 2 * a * a3 ** 2 * b3)
    du_db3 = 2.0 * (2 * a ** 3 * b + 2 * a * b ** 3 - 2 * a ** 2 * a3 * b3
                    + 2 * b ** 2 * a3 * b3 + 2 * a * b * a3 ** 2)
    du_da3 = 2.0 * (-a ** 2 * b3 ** 2 + b ** 2 * b3 ** 2 + 4 * a * b * a3 * b3)
    return np.array([a * du_da, b * du_db, b3 * du_db3, a3 * du_da3])


def superpotential_flow_residual(funcs, dfuncs_dt) -> float:
    """Max-norm residual of d(alpha)/dr - G^-1 du/d(alpha) at one sample.

    `funcs` = (a, b, a3, b3) and `dfuncs_dt` their derivatives in flow time;
    the radial variable r satisfies dt/dr = sqrt(det g).
    """
    a, b, a3, b3 = funcs
    da, db, da3, db3 = dfuncs_dt
    if min(a, b, a3, b3) <= 0.0:
        raise NonPositiveMetricFunctions("need a, b, a3, b3 > 0")
    root = 8.0 * a * a * b * b * a3 * b3       # sqrt(det g) of the block metric
    dalpha_dr = root * np.array([da / a, db / b, db3 / b3, da3 / a3])
    rhs = _G_INV @ superpotential_grad_log(a, b, a3, b3)
    return float(np.max(np.abs(dalpha_dr - rhs)))


def superpotential_residual(traj, h: float = 1e-5) -> np.ndarray:
    """Per-sample superpotential-flow residual of a trajectory restricted to
    the a1=a2, b1=b2 family (max-norm per sample)."""
    out = np.empty(traj.n_samples)
    for i in range(traj.n_samples):
        g, gp = traj.metric_and_derivative(i, h=h)
        a_i, b_i = triaxial_functions_from_metric(g)
        if abs(a_i[0] - a_i[1]) > 1e-8 * a_i[0] or abs(b_i[0] - b_i[1]) > 1e-8 * b_i[0]:
            raise NonPositiveMetricFunctions("trajectory is not of a1=a2, b1=b2 type")
        Gp = _as_matrix(gp)
        # chain rule through a^2 = (g_diag - g_cross)/2 per block
        da = 0.25 * (0.5 * (Gp[0, 0] + Gp[1, 1]) - Gp[0, 1]) / a_i[0]
        db = 0.25 * (0.5 * (Gp[0, 0] + Gp[1, 1]) + Gp[0, 1]) / b_i[0]
        da3 = 0.25 * (0.5 * (Gp[4, 4] + Gp[5, 5]) - Gp[4, 5]) / a_i[2]
        db3 = 0.25 * (0.5 * (Gp[4, 4] + Gp[5, 5]) + Gp[4, 5]) / b_i[2]
        out[i] = superpotential_flow_residual(
            (a_i[0], b_i[0], a_i[2], b_i[2]), (da, db, da3, db3))
    return out
