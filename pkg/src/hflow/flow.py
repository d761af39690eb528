"""Matrix form of the evolution equations and invariant-monitoring integration.

The flow is Q' = P, (P^2)'_0 = -2*Rhat, integrated as a first-order system
in (Q, P) with P' obtained from a linear solve.  Reduced diagonal, triaxial
and closed-form families are provided, all oriented so that the metric
volume grows with increasing t (matching the cone solution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import curvature, forms6, matrix_param
from . import matrix_param as mp
from .errors import (DegenerateStructure, DiagonalDegenerate, HFlowError,
                     NotNormalized, SylvesterDegenerate, ZeroMetricFunction,
                     ZeroMomentum)

SQRT3 = math.sqrt(3.0)


class AnsatzKind(str, Enum):
    GENERAL = "general"
    TWO = "two"
    THREE = "three"
    SIX = "six"
    TRIAXIAL = "triaxial"


@dataclass(frozen=True)
class FlowState:
    """Full matrix state of the flow at one time."""

    Q: np.ndarray
    P: np.ndarray
    a: float = 0.0
    b: float = 0.0
    t: float = 0.0

    def pair(self) -> matrix_param.HalfFlatPair:
        return matrix_param.HalfFlatPair(self.Q, self.P, self.a, self.b)

    def hamiltonian(self) -> float:
        return matrix_param.hamiltonian_qp(self.Q, self.P, self.a, self.b)


# ---------------------------------------------------------------------------
# right-hand sides

_SYM_BASIS = []
for _i in range(4):
    for _j in range(_i, 4):
        _E = np.zeros((4, 4))
        _E[_i, _j] = _E[_j, _i] = 1.0
        _SYM_BASIS.append(_E)
_SYM_POSITIONS = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def general_rhs(state: FlowState):
    """(Qdot, Pdot) with Pdot the trace-free symmetric solution of
    (P X + X P)_0 = -2 Rhat."""
    P = state.P
    RH = matrix_param.Rhat(state.Q, state.a, state.b)  # DegenerateStructure if r >= 0
    A = np.empty((10, 10))
    rhs = np.empty(10)
    for col, E in enumerate(_SYM_BASIS):
        M = matrix_param.traceless(P @ E + E @ P)
        for row, (i, j) in enumerate(_SYM_POSITIONS):
            A[row, col] = M[i, j]
        A[9, col] = np.trace(E)
    target = -2.0 * RH
    for row, (i, j) in enumerate(_SYM_POSITIONS):
        rhs[row] = target[i, j]
    rhs[9] = 0.0
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SylvesterDegenerate(f"momentum update system cond = {cond:.3g}")
    x = np.linalg.solve(A, rhs)
    X = np.zeros((4, 4))
    for c, E in enumerate(_SYM_BASIS):
        X += x[c] * E
    return np.array(P, copy=True), X


def _diag_R(d, a: float, b: float):
    """Diagonal of R and the invariant lambda for diagonal Q."""
    d0, d1, d2, d3 = d
    tr2 = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
    tr3 = d0 ** 3 + d1 ** 3 + d2 ** 3 + d3 ** 3
    det = d0 * d1 * d2 * d3
    lam = det + (a - b) / 6.0 * tr3 + 0.5 * a * b * tr2 + (a * b) ** 2
    hd = 0.5 * (a - b)
    cc = a * b + 0.5 * tr2
    q3_4 = 0.25 * tr3
    q2_4 = 0.25 * tr2
    sign = matrix_param._R_SIGN
    R = tuple(sign * (-(x ** 3 - q3_4) + hd * (x * x - q2_4) + cc * x) for x in d)
    return R, lam


def diag_rhs(q, p, a: float, b: float) -> np.ndarray:
    """pdot for diagonal trace-free (Q, P) given as their 4-entry diagonals."""
    R, lam = _diag_R(tuple(q), a, b)
    if lam >= 0.0:
        raise DegenerateStructure(f"lambda = {lam:.6g} >= 0")
    s = math.sqrt(-0.25 * lam)
    bvec = tuple(-2.0 * Ri / s for Ri in R)
    p = tuple(float(x) for x in p)
    scale = max(abs(x) for x in p)
    if scale == 0.0 or min(abs(x) for x in p) < 1e-13 * scale:
        raise DiagonalDegenerate("some p_i ~ 0")
    inv_sum = sum(1.0 / x for x in p)
    if abs(inv_sum) < 1e-13 / scale:
        raise DiagonalDegenerate("sum 1/p_i ~ 0")
    S = -2.0 * sum(bi / pi for bi, pi in zip(bvec, p)) / inv_sum
    return np.array([(bi + 0.5 * S) / (2.0 * pi) for bi, pi in zip(bvec, p)])


def sixfn_rhs(q, p, a: float, b: float) -> np.ndarray:
    """pdot for the diagonal family in 3x3-side coordinates (q_i, p_i).

    Solves p2'p3 + p2p3' = (1/(p1p2p3)) (-ab q1 + (a-b) q2 q3
    + q1 (q2^2 + q3^2 - q1^2)) and its cyclic images; valid on normalized
    states.
    """
    q1, q2, q3 = (float(x) for x in q)
    p1, p2, p3 = (float(x) for x in p)
    prod = p1 * p2 * p3
    if min(abs(p1), abs(p2), abs(p3)) < 1e-13 * max(abs(p1), abs(p2), abs(p3), 1e-300):
        raise ZeroMomentum("some p_i = 0")
    c1 = (-a * b * q1 + (a - b) * q2 * q3 + q1 * (q2 * q2 + q3 * q3 - q1 * q1)) / prod
    c2 = (-a * b * q2 + (a - b) * q3 * q1 + q2 * (q3 * q3 + q1 * q1 - q2 * q2)) / prod
    c3 = (-a * b * q3 + (a - b) * q1 * q2 + q3 * (q1 * q1 + q2 * q2 - q3 * q3)) / prod
    v1 = (p2 * c2 + p3 * c3 - p1 * c1) / (2.0 * p2 * p3)
    v2 = (p3 * c3 + p1 * c1 - p2 * c2) / (2.0 * p3 * p1)
    v3 = (p1 * c1 + p2 * c2 - p3 * c3) / (2.0 * p1 * p2)
    return np.array([v1, v2, v3])


def triaxial_rhs(a_i, b_i):
    """(adot_i, bdot_i) for the triaxial family, oriented so the metric
    expands with t.

    The expanding orientation is fixed by the cone solution; it is the
    time-mirror of the shrinking convention in which these six equations
    are sometimes quoted.
    """
    a1, a2, a3 = (float(x) for x in a_i)
    b1, b2, b3 = (float(x) for x in b_i)
    if min(abs(a1), abs(a2), abs(a3), abs(b1), abs(b2), abs(b3)) == 0.0:
        raise ZeroMetricFunction("some a_i or b_i = 0")
    da1 = (a1 * a1 / (a3 * b2) + a1 * a1 / (a2 * b3) - a2 / b3 - a3 / b2
           - b2 / a3 - b3 / a2) / 4.0
    db1 = (b1 * b1 / (a2 * a3) - b1 * b1 / (b2 * b3) - a2 / a3 - a3 / a2
           + b2 / b3 + b3 / b2) / 4.0
    da2 = (a2 * a2 / (a3 * b1) + a2 * a2 / (a1 * b3) - a1 / b3 - a3 / b1
           - b1 / a3 - b3 / a1) / 4.0
    db2 = (b2 * b2 / (a1 * a3) - b2 * b2 / (b1 * b3) - a1 / a3 - a3 / a1
           + b1 / b3 + b3 / b1) / 4.0
    da3 = (a3 * a3 / (a2 * b1) + a3 * a3 / (a1 * b2) - a1 / b2 - a2 / b1
           - b1 / a2 - b2 / a1) / 4.0
    db3 = (b3 * b3 / (a1 * a2) - b3 * b3 / (b1 * b2) - a1 / a2 - a2 / a1
           + b1 / b2 + b2 / b1) / 4.0
    return -np.array([da1, da2, da3]), -np.array([db1, db2, db3])


# ---------------------------------------------------------------------------
# embeddings between reduced coordinates and (Q, P)

def _diag4_to_n3(d):
    """Diagonal of a trace-free Sym4 to the 3x3-side diagonal."""
    return np.array([0.5 * (d[2] + d[3]), 0.5 * (d[1] + d[3]), 0.5 * (d[1] + d[2])])


def _n3_to_diag4(n):
    n1, n2, n3 = n
    return np.array([-n1 - n2 - n3, -n1 + n2 + n3, n1 - n2 + n3, n1 + n2 - n3])


def triaxial_to_sixfn(a_i, b_i):
    """(q_i, p_i, class a) of a triaxial state; the class satisfies b = -a."""
    a1, a2, a3 = a_i
    b1, b2, b3 = b_i
    q1 = -a1 * a2 * a3 - a3 * b1 * b2 - a2 * b1 * b3 + a1 * b2 * b3
    q2 = -a1 * a2 * a3 - a3 * b1 * b2 + a2 * b1 * b3 - a1 * b2 * b3
    q3 = -a1 * a2 * a3 + a3 * b1 * b2 - a2 * b1 * b3 - a1 * b2 * b3
    p = np.array([-2 * a1 * b1, -2 * a2 * b2, -2 * a3 * b3])
    cls = a1 * a2 * a3 - a3 * b1 * b2 - a2 * b1 * b3 - a1 * b2 * b3
    return np.array([q1, q2, q3]), p, cls


@dataclass(frozen=True)
class AnsatzState:
    """Reduced state of one of the symmetric families."""

    kind: AnsatzKind
    coords: np.ndarray
    a: float = 0.0
    b: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))

    def to_flow_state(self) -> FlowState:
        k, c = self.kind, self.coords
        if k is AnsatzKind.GENERAL:
            Q, P = _unpack_sym_pair(c)
            return FlowState(Q, P, self.a, self.b, self.t)
        if k is AnsatzKind.TWO:
            U, V, dU, dV = c
            d = np.array([-2 * U - V, U, U, V])
            dp = np.array([-2 * dU - dV, dU, dU, dV])
            return FlowState(np.diag(d), np.diag(dp), self.a, self.b, self.t)
        if k is AnsatzKind.THREE:
            d = np.array([-c[0] - c[1] - c[2], c[0], c[1], c[2]])
            dp = np.array([-c[3] - c[4] - c[5], c[3], c[4], c[5]])
            return FlowState(np.diag(d), np.diag(dp), self.a, self.b, self.t)
        if k is AnsatzKind.SIX:
            return FlowState(np.diag(_n3_to_diag4(c[:3])), np.diag(_n3_to_diag4(c[3:])),
                             self.a, self.b, self.t)
        q, p, cls = triaxial_to_sixfn(c[0::2], c[1::2])
        return FlowState(np.diag(_n3_to_diag4(q)), np.diag(_n3_to_diag4(p)),
                         cls, -cls, self.t)


def _pack_sym_pair(Q, P):
    out = np.empty(20)
    k = 0
    for M in (Q, P):
        for i in range(4):
            for j in range(i, 4):
                out[k] = M[i, j]
                k += 1
    return out


def _unpack_sym_pair(y):
    mats = []
    k = 0
    for _ in range(2):
        M = np.empty((4, 4))
        for i in range(4):
            for j in range(i, 4):
                M[i, j] = M[j, i] = y[k]
                k += 1
        mats.append(M)
    return mats[0], mats[1]


# ---------------------------------------------------------------------------
# closed-form reference solutions

DIAG_M3111 = np.diag([-3.0, 1.0, 1.0, 1.0])


def closed_nk_cone(t: float) -> FlowState:
    """State of the cone solution over the nearly-Kaehler structure."""
    if t == 0.0:
        raise DegenerateStructure("cone apex at t = 0")
    q = -t ** 3 / (18.0 * SQRT3)
    p = -t ** 2 / (6.0 * SQRT3)
    return FlowState(q * DIAG_M3111, p * DIAG_M3111, 0.0, 0.0, t)


def closed_section4(s: float, a: float):
    """(x, alpha, dt/ds) of the explicit one-parameter family with class
    (a, -a); defined for s < min(0, -cbrt(a))."""
    s = float(s)
    if not s < min(0.0, -np.cbrt(a)):
        raise DegenerateStructure(f"s = {s} outside the solution domain")
    w = 1.0 + a * s ** -3
    x = (4.0 * s ** 3 + a) / 3.0
    alpha = (4.0 * s * s / SQRT3) * math.sqrt(w) / (4.0 * s ** 3 + a)
    dt_ds = -2.0 * SQRT3 / math.sqrt(w)
    return x, alpha, dt_ds


def closed_section4_derivs(s: float, a: float):
    """Analytic (dx/ds, dalpha/ds) of the explicit family."""
    s = float(s)
    w = 1.0 + a * s ** -3
    dw = -3.0 * a * s ** -4
    den = 4.0 * s ** 3 + a
    dx = 4.0 * s * s
    dalpha = (4.0 / SQRT3) * (
        (2.0 * s * math.sqrt(w) + s * s * dw / (2.0 * math.sqrt(w))) / den
        - s * s * math.sqrt(w) * 12.0 * s * s / den ** 2)
    return dx, dalpha


def section4_state(s: float, a: float, t: float = 0.0) -> AnsatzState:
    """The explicit family embedded as a six-function diagonal state."""
    x, alpha, _ = closed_section4(s, a)
    q = np.full(3, x)
    p = np.full(3, -1.5 * alpha * x)
    return AnsatzState(AnsatzKind.SIX, np.concatenate([q, p]), a, -a, t)


def closed_abc(s: float) -> dict:
    """Triaxial functions of the explicit circle-bundle-over-cone metric,
    with derivatives in s; regular for s > 9/2."""
    s = float(s)
    if s <= 4.5:
        raise DegenerateStructure("bolt at s = 9/2")
    A = (s - 1.5) * (s + 4.5) / 12.0
    B = (s + 1.5) * (s - 4.5) / 12.0
    C = (s * s - 81.0 / 4.0) / (s * s - 9.0 / 4.0)
    a = math.sqrt(A)
    b = math.sqrt(B)
    a3 = s / 3.0
    b3 = math.sqrt(C)
    dA = (2.0 * s + 3.0) / 12.0
    dB = (2.0 * s - 3.0) / 12.0
    dC = 36.0 * s / (s * s - 9.0 / 4.0) ** 2
    return {
        "a": a, "b": b, "a3": a3, "b3": b3,
        "da_ds": dA / (2.0 * a), "db_ds": dB / (2.0 * b),
        "da3_ds": 1.0 / 3.0, "db3_ds": dC / (2.0 * b3),
        "dt_ds": 1.0 / b3,
    }


def abc_state(s: float, t: float = 0.0) -> AnsatzState:
    f = closed_abc(s)
    coords = np.array([f["a"], f["b"], f["a"], f["b"], f["a3"], f["b3"]])
    return AnsatzState(AnsatzKind.TRIAXIAL, coords, t=t)


# ---------------------------------------------------------------------------
# normalized initial data at the base point (1,1,1)

def nk_velocity() -> float:
    """The diagonal velocity nu with (2 nu)^3 = -4 sqrt(3)."""
    return -(SQRT3 / 2.0) ** (1.0 / 3.0)


def three_function_residual(x: float, y: float, z: float) -> float:
    return (x + y) * (x + z) * (y + z) + 4.0 * SQRT3


def init_three_function(x: float, y: float, z: float,
                        tol: float = 1e-9) -> AnsatzState:
    """Normalized three-function state at base (U,V,W) = (1,1,1), t = 0."""
    res = three_function_residual(x, y, z)
    if abs(res) > tol:
        raise NotNormalized(res)
    return AnsatzState(AnsatzKind.THREE, np.array([1.0, 1.0, 1.0, x, y, z]))


def two_function_curve_y(x: float) -> float:
    """Positive-definite branch of the velocity curve x (x+y)^2 = -2 sqrt(3)."""
    if x >= 0.0:
        raise ValueError("the curve requires x < 0")
    return -x - math.sqrt(-2.0 * SQRT3 / x)


def init_two_function(x: float, y: float, tol: float = 1e-9) -> AnsatzState:
    """Normalized two-function state at base (U,V) = (1,1), t = 0."""
    res = x * (x + y) ** 2 + 2.0 * SQRT3
    if abs(res) > tol:
        raise NotNormalized(res)
    return AnsatzState(AnsatzKind.TWO, np.array([1.0, 1.0, x, y]))


# ---------------------------------------------------------------------------
# the integrator

@dataclass
class Trajectory:
    """Sampled flow solution with per-sample invariant diagnostics."""

    kind: AnsatzKind
    a: float
    b: float
    times: np.ndarray
    coords: np.ndarray
    derivs: np.ndarray
    lam: np.ndarray
    sqrt_neg_lam: np.ndarray
    hamiltonian: np.ndarray
    comm_norm: np.ndarray
    min_metric_eig: np.ndarray
    scalar_curv: np.ndarray
    termination: str
    t_final: float
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def state_at(self, i: int) -> FlowState:
        return AnsatzState(self.kind, self.coords[i], self.a, self.b,
                           self.times[i]).to_flow_state()

    def metric_at(self, i: int) -> np.ndarray:
        return _metric_from_coords(self.kind, self.coords[i], self.a, self.b)

    def metric_and_derivative(self, i: int, h: float = 1e-5):
        """Metric and its t-derivative by central differences along the
        stored flow tangent."""
        c = self.coords[i]
        dc = self.derivs[i]
        gp = _metric_from_coords(self.kind, c + h * dc, self.a, self.b)
        gm = _metric_from_coords(self.kind, c - h * dc, self.a, self.b)
        return self.metric_at(i), (gp - gm) / (2.0 * h)


def _metric_from_coords(kind: AnsatzKind, c, a: float, b: float) -> np.ndarray:
    if kind is AnsatzKind.TRIAXIAL:
        return curvature.triaxial_metric(c[0::2], c[1::2])
    if kind is AnsatzKind.GENERAL:
        Q, P = _unpack_sym_pair(c)
        pair = matrix_param.HalfFlatPair(Q, P, a, b)
        omega, gamma = matrix_param.forms_from_pair(pair)
        return forms6.su3_metric(omega, gamma).g
    d, p = _split_diag(kind, c)
    return curvature.diag_metric(_diag4_to_n3(d), _diag4_to_n3(p), a, b)


def _split_diag(kind: AnsatzKind, c):
    if kind is AnsatzKind.TWO:
        U, V, dU, dV = c
        return (np.array([-2 * U - V, U, U, V]),
                np.array([-2 * dU - dV, dU, dU, dV]))
    if kind is AnsatzKind.THREE:
        return (np.array([-c[0] - c[1] - c[2], c[0], c[1], c[2]]),
                np.array([-c[3] - c[4] - c[5], c[3], c[4], c[5]]))
    if kind is AnsatzKind.SIX:
        return _n3_to_diag4(c[:3]), _n3_to_diag4(c[3:])
    raise ValueError(f"not a diagonal kind: {kind}")


def _coords_rhs(kind: AnsatzKind, c, a: float, b: float) -> np.ndarray:
    """Time derivative of the reduced coordinates."""
    if kind is AnsatzKind.GENERAL:
        Q, P = _unpack_sym_pair(c)
        Qd, Pd = general_rhs(FlowState(Q, P, a, b))
        return _pack_sym_pair(Qd, Pd)
    if kind is AnsatzKind.TRIAXIAL:
        da, db = triaxial_rhs(c[0::2], c[1::2])
        out = np.empty(6)
        out[0::2] = da
        out[1::2] = db
        return out
    d, p = _split_diag(kind, c)
    pdot = diag_rhs(d, p, a, b)
    if kind is AnsatzKind.TWO:
        return np.array([c[2], c[3], pdot[1], pdot[3]])
    if kind is AnsatzKind.THREE:
        return np.array([c[3], c[4], c[5], pdot[1], pdot[2], pdot[3]])
    return np.concatenate([c[3:], _diag4_to_n3(pdot)])


def _diag_invariants(kind: AnsatzKind, c, a: float, b: float):
    """(lambda, H, metric_pd, min_block_eig) for diagonal kinds, cheaply."""
    d, p = _split_diag(kind, c)
    _, lam = _diag_R(tuple(d), a, b)
    trP3 = float(p[0] ** 3 + p[1] ** 3 + p[2] ** 3 + p[3] ** 3)
    H = math.sqrt(-lam) - trP3 / 12.0 if lam < 0.0 else float("inf")
    n = _diag4_to_n3(d)
    pn = _diag4_to_n3(p)
    min_eig = float("inf")
    pd = True
    pairs = ((1, 2, 0), (0, 2, 1), (0, 1, 2))
    for (i, j, k) in pairs:
        den = pn[i] * pn[j]
        if den == 0.0:
            return lam, H, False, -float("inf")
        g11 = (n[i] * n[j] + a * n[k]) / den
        g22 = (n[i] * n[j] - b * n[k]) / den
        g12 = (n[k] ** 2 - n[i] ** 2 - n[j] ** 2 - a * b) / (2.0 * den)
        tr = g11 + g22
        disc = math.sqrt(max(0.25 * (g11 - g22) ** 2 + g12 * g12, 0.0))
        lo = 0.5 * tr - disc
        min_eig = min(min_eig, lo)
        if lo <= 0.0:
            pd = False
    return lam, H, pd, min_eig


def _rk4_step(kind, c, a, b, h):
    k1 = _coords_rhs(kind, c, a, b)
    k2 = _coords_rhs(kind, c + 0.5 * h * k1, a, b)
    k3 = _coords_rhs(kind, c + 0.5 * h * k2, a, b)
    k4 = _coords_rhs(kind, c + h * k3, a, b)
    return c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# -- plain-float fast path for the diagonal families ------------------------

def _rhs8(y, a, b):
    """(qdot, pdot) on the 8-tuple (diag Q, diag P); plain floats for speed."""
    d0, d1, d2, d3, p0, p1, p2, p3 = y
    tr2 = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
    tr3 = d0 * d0 * d0 + d1 * d1 * d1 + d2 * d2 * d2 + d3 * d3 * d3
    det = d0 * d1 * d2 * d3
    lam = det + (a - b) * tr3 / 6.0 + 0.5 * a * b * tr2 + (a * b) ** 2
    if lam >= 0.0:
        raise DegenerateStructure(f"lambda = {lam:.6g} >= 0")
    s = math.sqrt(-0.25 * lam)
    hd = 0.5 * (a - b)
    cc = a * b + 0.5 * tr2
    q34 = 0.25 * tr3
    q24 = 0.25 * tr2
    f = -2.0 * matrix_param._R_SIGN / s
    b0 = f * (-(d0 * d0 * d0 - q34) + hd * (d0 * d0 - q24) + cc * d0)
    b1 = f * (-(d1 * d1 * d1 - q34) + hd * (d1 * d1 - q24) + cc * d1)
    b2 = f * (-(d2 * d2 * d2 - q34) + hd * (d2 * d2 - q24) + cc * d2)
    b3 = f * (-(d3 * d3 * d3 - q34) + hd * (d3 * d3 - q24) + cc * d3)
    scale = max(abs(p0), abs(p1), abs(p2), abs(p3))
    if scale == 0.0 or min(abs(p0), abs(p1), abs(p2), abs(p3)) < 1e-13 * scale:
        raise DiagonalDegenerate("some p_i ~ 0")
    i0, i1, i2, i3 = 1.0 / p0, 1.0 / p1, 1.0 / p2, 1.0 / p3
    inv_sum = i0 + i1 + i2 + i3
    if abs(inv_sum) < 1e-13 / scale:
        raise DiagonalDegenerate("sum 1/p_i ~ 0")
    S = -2.0 * (b0 * i0 + b1 * i1 + b2 * i2 + b3 * i3) / inv_sum
    return (p0, p1, p2, p3,
            (b0 + 0.5 * S) * 0.5 * i0, (b1 + 0.5 * S) * 0.5 * i1,
            (b2 + 0.5 * S) * 0.5 * i2, (b3 + 0.5 * S) * 0.5 * i3)


def _rk4_8(y, a, b, h):
    k1 = _rhs8(y, a, b)
    k2 = _rhs8(tuple(y[i] + 0.5 * h * k1[i] for i in range(8)), a, b)
    k3 = _rhs8(tuple(y[i] + 0.5 * h * k2[i] for i in range(8)), a, b)
    k4 = _rhs8(tuple(y[i] + h * k3[i] for i in range(8)), a, b)
    return tuple(y[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
                 for i in range(8))


def _inv8(y, a, b):
    """(lambda, H, pd, min_block_eig) on the 8-tuple, plain floats."""
    d0, d1, d2, d3, p0, p1, p2, p3 = y
    tr2 = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
    tr3 = d0 * d0 * d0 + d1 * d1 * d1 + d2 * d2 * d2 + d3 * d3 * d3
    det = d0 * d1 * d2 * d3
    lam = det + (a - b) * tr3 / 6.0 + 0.5 * a * b * tr2 + (a * b) ** 2
    trP3 = p0 * p0 * p0 + p1 * p1 * p1 + p2 * p2 * p2 + p3 * p3 * p3
    H = math.sqrt(-lam) - trP3 / 12.0 if lam < 0.0 else float("inf")
    n1, n2, n3 = 0.5 * (d2 + d3), 0.5 * (d1 + d3), 0.5 * (d1 + d2)
    m1, m2, m3 = 0.5 * (p2 + p3), 0.5 * (p1 + p3), 0.5 * (p1 + p2)
    min_eig = float("inf")
    pd = True
    for (ni, nj, nk, den) in ((n2, n3, n1, m2 * m3), (n1, n3, n2, m1 * m3),
                              (n1, n2, n3, m1 * m2)):
        if den == 0.0:
            return lam, H, False, -float("inf")
        g11 = (ni * nj + a * nk) / den
        g22 = (ni * nj - b * nk) / den
        g12 = (nk * nk - ni * ni - nj * nj - a * b) / (2.0 * den)
        disc = math.sqrt(0.25 * (g11 - g22) ** 2 + g12 * g12)
        lo = 0.5 * (g11 + g22) - disc
        if lo < min_eig:
            min_eig = lo
        if lo <= 0.0:
            pd = False
    return lam, H, pd, min_eig


def _state_invariants(kind, c, a, b):
    """(lambda, H, pd, min_eig, comm) for any kind."""
    if kind in (AnsatzKind.TWO, AnsatzKind.THREE, AnsatzKind.SIX):
        lam, H, pd, min_eig = _diag_invariants(kind, c, a, b)
        return lam, H, pd, min_eig, 0.0
    if kind is AnsatzKind.TRIAXIAL:
        q, p, cls = triaxial_to_sixfn(c[0::2], c[1::2])
        d = _n3_to_diag4(q)
        dp = _n3_to_diag4(p)
        _, lam = _diag_R(tuple(d), cls, -cls)
        trP3 = float(np.sum(dp ** 3))
        H = math.sqrt(-lam) - trP3 / 12.0 if lam < 0.0 else float("inf")
        aa = c[0::2] ** 2
        bb = c[1::2] ** 2
        min_eig = float(min(2.0 * aa.min(), 2.0 * bb.min()))
        return lam, H, min_eig > 0.0, min_eig, 0.0
    Q, P = _unpack_sym_pair(c)
    lam = matrix_param.lambda_qc(Q, a, b)
    trP3 = float(np.trace(P @ P @ P))
    H = math.sqrt(-lam) - trP3 / 12.0 if lam < 0.0 else float("inf")
    comm = float(np.linalg.norm(Q @ P - P @ Q))
    eigs = np.linalg.eigvalsh(_metric_from_coords(AnsatzKind.GENERAL, c, a, b))
    return lam, H, bool(eigs[0] > 0.0), float(eigs[0]), comm


def integrate(initial, t1: float, *, step: float = 1e-3, adaptive: bool = False,
              rtol: float = 1e-9, atol: float = 1e-12, sample_every: int = 1,
              eps_stab: float = 1e-8, drift_budget: float = 1e-6,
              max_abs: float = 1e12, compute_scalar: bool = True,
              renormalize: bool = False, validate_initial: bool = True,
              validate_tol: float = 1e-9, wall_refine_depth: int = 22) -> Trajectory:
    """Integrate the flow from `initial` (FlowState or AnsatzState) to t1.

    Fixed-step classical RK4 by default; `adaptive` switches to an embedded
    RK45 with the given tolerances.  Integration stops at the end of the
    range or on degeneracy (lambda >= -eps_stab), loss of metric
    definiteness, invariant-drift breach (|H| exceeding drift_budget
    relative to the invariant scale), overflow, or a singular momentum
    update; the reason is recorded on the trajectory.  Near a stop boundary
    the step is bisected (up to wall_refine_depth halvings) so the boundary
    time and its label are resolved accurately.
    """
    if isinstance(initial, FlowState):
        state = AnsatzState(AnsatzKind.GENERAL,
                            _pack_sym_pair(matrix_param.sym4_traceless(initial.Q),
                                           matrix_param.sym4_traceless(initial.P)),
                            initial.a, initial.b, initial.t)
    else:
        state = initial
    kind, a, b = state.kind, state.a, state.b
    if validate_initial:
        state.to_flow_state().pair().validate(tol=validate_tol)

    t0 = float(state.t)
    span = float(t1) - t0
    if span == 0.0:
        raise ValueError("empty integration range")
    n_steps = max(1, round(abs(span) / step))
    h = span / n_steps

    times = [t0]
    coords = [state.coords.copy()]
    derivs = [_safe_rhs(kind, state.coords, a, b)]
    termination = "Completed"
    t_final = t0

    diag_mode = kind in (AnsatzKind.TWO, AnsatzKind.THREE, AnsatzKind.SIX) \
        and not adaptive
    if diag_mode:
        d4, p4 = _split_diag(kind, state.coords)
        c = tuple(float(v) for v in d4) + tuple(float(v) for v in p4)

        def do_step(y, hh):
            return _rk4_8(y, a, b, hh)

        def invariants(y):
            return _inv8(y, a, b)

        def finite_ok(y):
            m = 0.0
            for v in y:
                av = abs(v)
                if av > m:
                    m = av
            return m <= max_abs and m == m and all(v == v for v in y)

        if kind is AnsatzKind.TWO:
            def to_coords(y):
                return np.array([y[1], y[3], y[5], y[7]])
        elif kind is AnsatzKind.THREE:
            def to_coords(y):
                return np.array([y[1], y[2], y[3], y[5], y[6], y[7]])
        else:
            def to_coords(y):
                return np.array([0.5 * (y[2] + y[3]), 0.5 * (y[1] + y[3]),
                                 0.5 * (y[1] + y[2]), 0.5 * (y[6] + y[7]),
                                 0.5 * (y[5] + y[7]), 0.5 * (y[5] + y[6])])
    else:
        c = state.coords.copy()

        def do_step(y, hh):
            return _rk4_step(kind, y, a, b, hh)

        def invariants(y):
            lam, H, pd, mineig, _ = _state_invariants(kind, y, a, b)
            return lam, H, pd, mineig

        def finite_ok(y):
            return bool(np.all(np.isfinite(y)) and np.max(np.abs(y)) <= max_abs)

        def to_coords(y):
            return np.asarray(y, dtype=float).copy()

    t = t0
    if adaptive:
        stepper = _Rk45Stepper(kind, a, b, rtol, atol, abs(h))

    lam0, _, _, _, _ = _state_invariants(kind, state.coords, a, b)
    drift_floor = math.sqrt(max(-lam0, 0.0))
    lam_peak = [max(-lam0, 0.0)]

    def violation(c_new, check_pd=True, check_drift=True):
        """Stop reason of a candidate state, or None (records the running
        peak of -lambda as a side effect)."""
        if not finite_ok(c_new):
            return "Overflow"
        lam, H, pd, _ = invariants(c_new)
        if lam >= -eps_stab:
            return "DegenerateStructure"
        if -lam > lam_peak[0]:
            lam_peak[0] = -lam
        if check_pd and not pd:
            return "IndefiniteMetric"
        # H is compared against the invariant scale of the trajectory; near a
        # degeneracy the current scale collapses, so the initial one floors it
        if check_drift and abs(H) > drift_budget * max(
                drift_floor, math.sqrt(max(-lam, 0.0))):
            return "DriftBreach"
        return None

    def advance_checked(c_cur, t_cur, h_cur, check, depth=0):
        """One checked step with recursive halving near a stop boundary.

        Returns (c_acc, t_acc, reason); reason is None when the full step was
        covered, otherwise the stop label at the refined boundary time.
        """
        try:
            c_try = do_step(c_cur, h_cur)
        except HFlowError as exc:
            reason = type(exc).__name__
            c_try = None
        else:
            reason = check(c_try)
        if reason is None:
            return c_try, t_cur + h_cur, None
        if depth >= wall_refine_depth:
            return c_cur, t_cur, reason
        c_half, t_half, r1 = advance_checked(c_cur, t_cur, 0.5 * h_cur, check, depth + 1)
        if r1 is not None:
            return c_half, t_half, r1
        return advance_checked(c_half, t_half, 0.5 * h_cur, check, depth + 1)

    def classify_stop(reason, c_stop, t_stop):
        """Resolve an ambiguous stop by probing towards the degeneracy.

        Invariant drift, momentum-update breakdown and definiteness loss all
        shadow a collapsing quartic invariant; when a short continuation with
        relaxed checks runs into the lambda wall, the stop is the wall.
        """
        if reason in ("Completed", "DegenerateStructure", "Overflow"):
            return reason, c_stop, t_stop
        relaxed = lambda cc: violation(cc, check_pd=False, check_drift=False)
        cp, tp = c_stop, t_stop
        direction = 1.0 if span > 0 else -1.0
        budget_t = min(0.5 * abs(span), 0.75)
        probe_end = t_stop + direction * budget_t
        if (probe_end - t1) * direction > 0:
            probe_end = t1
        probe_reason = None
        n_probe = min(800, max(1, round(abs(probe_end - tp) / step)))
        for j in range(n_probe):
            tgt = t_stop + (probe_end - t_stop) * (j + 1) / n_probe
            tp_prev = tp
            cp, tp, probe_reason = advance_checked(cp, tp, tgt - tp, relaxed,
                                                   depth=6)
            if probe_reason is not None:
                break
            if abs(tp - tp_prev) < 1e-6 * step:
                break
        lam_end = invariants(cp)[0]
        collapsed = -lam_end < 1e-2 * max(lam_peak[0], 1e-30)
        if probe_reason == "DegenerateStructure":
            return "DegenerateStructure", cp, tp
        if probe_reason is not None and collapsed:
            return "DegenerateStructure", cp, tp
        return reason, c_stop, t_stop

    raw_termination = [None]

    i = 0
    while i < n_steps:
        t_target = t0 + span * (i + 1) / n_steps
        if adaptive:
            try:
                c_new, t_new = stepper.advance(c, t, t_target)
                reason = violation(c_new)
            except HFlowError as exc:
                reason = type(exc).__name__
                c_new, t_new = c, t
            if reason is not None:
                raw_termination[0] = reason
                termination, c, t_final = classify_stop(reason, c_new, t_new)
                break
        else:
            c_new, t_new, reason = advance_checked(c, t, t_target - t, violation)
            if reason is not None:
                raw_termination[0] = reason
                termination, c, t_final = classify_stop(reason, c_new, t_new)
                break
        if renormalize:
            if diag_mode:
                lam, _, _, _ = invariants(c_new)
                trp3 = sum(v ** 3 for v in c_new[4:])
                kappa = (12.0 * math.sqrt(-lam) / trp3) ** (1.0 / 3.0)
                c_new = c_new[:4] + tuple(kappa * v for v in c_new[4:])
            else:
                c_new = _renormalize(kind, c_new, a, b)
        c, t = c_new, t_new
        i += 1
        t_final = t
        if i % sample_every == 0 or i == n_steps:
            times.append(t)
            rc = to_coords(c)
            coords.append(rc)
            derivs.append(_safe_rhs(kind, rc, a, b))
    if times[-1] != t_final:
        # record the last accepted state when termination fell between samples
        times.append(t_final)
        rc = to_coords(c)
        coords.append(rc)
        derivs.append(_safe_rhs(kind, rc, a, b))

    traj = _assemble(kind, a, b, times, coords, derivs, termination, t_final,
                     compute_scalar)
    traj.meta["t0"] = t0
    traj.meta["t1"] = float(t1)
    traj.meta["raw_termination"] = raw_termination[0] or termination
    traj.meta["step"] = step
    traj.meta["adaptive"] = adaptive
    if termination == "DegenerateStructure":
        traj.meta["singular_time_estimate"] = t_final
    return traj


def _safe_rhs(kind, c, a, b):
    try:
        return _coords_rhs(kind, c, a, b)
    except HFlowError:
        return np.full_like(np.asarray(c, dtype=float), np.nan)


def _renormalize(kind, c, a, b):
    lam, H, _, _, _ = _state_invariants(kind, c, a, b)
    if not np.isfinite(H):
        return c
    if kind is AnsatzKind.TRIAXIAL:
        return c
    c = c.copy()
    if kind is AnsatzKind.GENERAL:
        Q, P = _unpack_sym_pair(c)
        tr = np.trace(P @ P @ P)
        kappa = (12.0 * math.sqrt(-lam) / tr) ** (1.0 / 3.0)
        return _pack_sym_pair(Q, kappa * P)
    d, p = _split_diag(kind, c)
    tr = float(np.sum(np.asarray(p) ** 3))
    kappa = (12.0 * math.sqrt(-lam) / tr) ** (1.0 / 3.0)
    half = len(c) // 2
    c[half:] *= kappa
    return c


class _Rk45Stepper:
    """Minimal Dormand-Prince 4(5) driver stepping exactly to sample times."""

    def __init__(self, kind, a, b, rtol, atol, h0):
        self.kind, self.a, self.b = kind, a, b
        self.rtol, self.atol = rtol, atol
        self.h = h0

    _C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
    _A = [
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
    _B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
    _B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                    187 / 2100, 1 / 40])

    def advance(self, c, t, t_target):
        direction = 1.0 if t_target >= t else -1.0
        while (t_target - t) * direction > 1e-15 * max(1.0, abs(t_target)):
            h = direction * min(self.h, abs(t_target - t))
            k = [np.asarray(_coords_rhs(self.kind, c, self.a, self.b))]
            for row in self._A[1:]:
                ci = c + h * sum(aij * kj for aij, kj in zip(row, k))
                k.append(np.asarray(_coords_rhs(self.kind, ci, self.a, self.b)))
            c5 = c + h * sum(bi * ki for bi, ki in zip(self._B5, k))
            c4 = c + h * sum(bi * ki for bi, ki in zip(self._B4, k))
            err = np.max(np.abs(c5 - c4) / (self.atol + self.rtol * np.maximum(
                np.abs(c), np.abs(c5))))
            if err <= 1.0 or abs(h) < 1e-14:
                t = t + h
                c = c5
                self.h = min(abs(h) * min(5.0, max(0.2, 0.9 * err ** -0.2 if err > 0 else 5.0)), 1.0)
            else:
                self.h = abs(h) * max(0.2, 0.9 * err ** -0.2)
        return c, t


def _assemble(kind, a, b, times, coords, derivs, termination, t_final,
              compute_scalar) -> Trajectory:
    n = len(times)
    lam = np.empty(n)
    H = np.empty(n)
    comm = np.empty(n)
    min_eig = np.empty(n)
    scal = np.full(n, np.nan)
    for idx in range(n):
        lam[idx], H[idx], _, min_eig[idx], comm[idx] = _state_invariants(
            kind, coords[idx], a, b)
        if compute_scalar:
            try:
                g = _metric_from_coords(kind, coords[idx], a, b)
                scal[idx] = curvature.ricci_scalar(g)
            except Exception:
                scal[idx] = np.nan
    with np.errstate(invalid="ignore"):
        snl = np.sqrt(np.maximum(-lam, 0.0))
    return Trajectory(kind=kind, a=a, b=b, times=np.asarray(times),
                      coords=np.asarray(coords), derivs=np.asarray(derivs),
                      lam=lam, sqrt_neg_lam=snl, hamiltonian=H, comm_norm=comm,
                      min_metric_eig=min_eig, scalar_curv=scal,
                      termination=termination, t_final=t_final)
