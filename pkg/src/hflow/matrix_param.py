"""Matrix calculus for invariant half-flat pairs.

A 2-form in the mixed block corresponds to a 3x3 matrix K, and an
equivariant isomorphism carries K to a trace-free symmetric 4x4 matrix.
Pairs (Q, P) of such matrices with [Q, P] = 0 parametrize half-flat
structures with class (a, b); the flow machinery lives in `flow`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import forms6
from .errors import (DegenerateStructure, NonPositiveDeterminant, NotHalfFlat,
                     NotPrimitive, NotStable)

# flipped to -1.0 by the verification CLI's fault-injection hook
_R_SIGN = 1.0


# ---------------------------------------------------------------------------
# the U -> V isomorphism

def iso3to4(K) -> np.ndarray:
    """Equivariant image of a 3x3 matrix as a trace-free symmetric 4x4 matrix."""
    k = np.asarray(K, dtype=float)
    (k11, k12, k13), (k21, k22, k23), (k31, k32, k33) = k
    return np.array([
        [-k11 - k22 - k33, k23 - k32, -k13 + k31, k12 - k21],
        [k23 - k32, -k11 + k22 + k33, -k12 - k21, -k13 - k31],
        [-k13 + k31, -k12 - k21, k11 - k22 + k33, -k23 - k32],
        [k12 - k21, -k13 - k31, -k23 - k32, k11 + k22 - k33],
    ])


def iso4to3(S) -> np.ndarray:
    """Inverse of iso3to4 (exact on trace-free symmetric input)."""
    S = np.asarray(S, dtype=float)
    k11 = 0.5 * (S[2, 2] + S[3, 3])
    k22 = 0.5 * (S[1, 1] + S[3, 3])
    k33 = 0.5 * (S[1, 1] + S[2, 2])
    k23 = 0.5 * (S[0, 1] - S[2, 3])
    k32 = -0.5 * (S[0, 1] + S[2, 3])
    k31 = 0.5 * (S[0, 2] - S[1, 3])
    k13 = -0.5 * (S[0, 2] + S[1, 3])
    k12 = 0.5 * (S[0, 3] - S[1, 2])
    k21 = -0.5 * (S[0, 3] + S[1, 2])
    return np.array([[k11, k12, k13], [k21, k22, k23], [k31, k32, k33]])


def sym4_traceless(M, tol: float = 1e-9) -> np.ndarray:
    """Validate and return a trace-free symmetric 4x4 matrix.

    Small traces (below tol relative to the norm) are projected out;
    anything larger raises.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ValueError("need a 4x4 matrix")
    if np.linalg.norm(M - M.T) > 1e-10 * max(1.0, np.linalg.norm(M)):
        raise ValueError("matrix is not symmetric")
    M = 0.5 * (M + M.T)
    tr = np.trace(M)
    if abs(tr) > tol * max(1.0, np.linalg.norm(M)):
        raise ValueError(f"matrix has trace {tr:.3g}")
    return M - (tr / 4.0) * np.eye(4)


def traceless(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    return M - (np.trace(M) / n) * np.eye(n)


def adjugate3(K) -> np.ndarray:
    """Adjugate of a 3x3 matrix, K Adj(K) = det(K) I."""
    K = np.asarray(K, dtype=float)
    c1 = np.trace(K)
    c2 = 0.5 * (c1 * c1 - np.trace(K @ K))
    return K @ K - c1 * K + c2 * np.eye(3)


def adjugate4(M) -> np.ndarray:
    """Adjugate of a 4x4 matrix via the characteristic polynomial."""
    M = np.asarray(M, dtype=float)
    c1 = np.trace(M)
    M2 = M @ M
    c2 = 0.5 * (c1 * c1 - np.trace(M2))
    M3 = M2 @ M
    c3 = (c1 ** 3 - 3.0 * c1 * np.trace(M2) + 2.0 * np.trace(M3)) / 6.0
    return c3 * np.eye(4) - c2 * M + c1 * M2 - M3


# ---------------------------------------------------------------------------
# invariant/covariant dictionary

def dictionary_residuals(K) -> np.ndarray:
    """Relative residual of each of the ten dictionary rows relating a 3x3
    matrix K to its 4x4 image S."""
    K = np.asarray(K, dtype=float)
    S = iso3to4(K)
    KKt = K @ K.T
    S2 = S @ S
    S3 = S2 @ S
    S4 = S3 @ S
    trS2 = np.trace(S2)
    trS3 = np.trace(S3)
    trS4 = np.trace(S4)
    detS = np.linalg.det(S)
    detK = np.linalg.det(K)

    def rel(lhs, rhs):
        scale = max(np.linalg.norm(np.atleast_1d(lhs)),
                    np.linalg.norm(np.atleast_1d(rhs)), 1e-30)
        return np.linalg.norm(np.atleast_1d(lhs - rhs)) / scale

    rows = [
        rel(iso3to4(K), S),
        rel(4.0 * np.trace(KKt), trS2),
        rel(iso3to4(-2.0 * adjugate3(K.T)), traceless(S2)),
        rel(-24.0 * detK, trS3),
        rel(iso3to4(4.0 * np.trace(KKt) * K), trS2 * S),
        rel(iso3to4(2.0 * KKt @ K), 0.75 * trS2 * S - traceless(S3)),
        rel(4.0 * np.trace(KKt @ KKt), 3.0 * detS + 0.25 * trS4),
        rel(2.0 * np.trace(KKt) ** 2, detS + 0.25 * trS4),
        rel(iso3to4(-24.0 * detK * K), trS3 * S),
        # the quartic covariant row needs Adj(K^T), matching the quadratic row
        rel(iso3to4(4.0 * np.trace(KKt) * adjugate3(K.T)),
            trS3 * S / 3.0 - traceless(S4)),
    ]
    return np.array(rows)


# ---------------------------------------------------------------------------
# half-flat pair algebra

def lambda_qc(Q, a: float, b: float) -> float:
    """Quartic invariant lambda(c, Q) = 4r of the reconstructed 3-form."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    Q3 = Q2 @ Q
    return float(np.linalg.det(Q) + (a - b) / 6.0 * np.trace(Q3)
                 + 0.5 * a * b * np.trace(Q2) + (a * b) ** 2)


def R_r(Q, a: float, b: float):
    """Cubic covariant R and the quarter-invariant r with 4r = lambda(c, Q)."""
    Q = np.asarray(Q, dtype=float)
    Q2 = Q @ Q
    Q3 = Q2 @ Q
    R = (-traceless(Q3) + 0.5 * (a - b) * traceless(Q2)
         + (a * b + 0.5 * np.trace(Q2)) * Q)
    r = 0.25 * lambda_qc(Q, a, b)
    return _R_SIGN * R, r


def Rhat(Q, a: float, b: float) -> np.ndarray:
    """R / sqrt(-r); raises DegenerateStructure when r >= 0."""
    R, r = R_r(Q, a, b)
    if r >= 0.0:
        raise DegenerateStructure(f"r = {r:.6g} >= 0")
    return R / math.sqrt(-r)


def hamiltonian_qp(Q, P, a: float, b: float) -> float:
    """Normalization functional sqrt(-lambda(c, Q)) - tr(P^3)/12."""
    lam = lambda_qc(Q, a, b)
    if lam >= 0.0:
        raise DegenerateStructure(f"lambda = {lam:.6g} >= 0")
    P = np.asarray(P, dtype=float)
    return math.sqrt(-lam) - np.trace(P @ P @ P) / 12.0


@dataclass(frozen=True)
class HalfFlatPair:
    """(Q, P, a, b) with commuting, admissibility and normalization checks."""

    Q: np.ndarray
    P: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "Q", sym4_traceless(self.Q))
        object.__setattr__(self, "P", sym4_traceless(self.P))

    def residuals(self) -> dict:
        Q, P = self.Q, self.P
        scale = max(np.linalg.norm(Q) * np.linalg.norm(P), 1e-30)
        comm = np.linalg.norm(Q @ P - P @ Q) / scale
        lam = lambda_qc(Q, self.a, self.b)
        trP3 = float(np.trace(P @ P @ P))
        if lam < 0.0:
            norm_res = abs(trP3 - 12.0 * math.sqrt(-lam)) / max(abs(trP3), 1e-30)
        else:
            norm_res = float("inf")
        return {"commutator": comm, "lambda": lam, "trP3": trP3,
                "normalization": norm_res}

    def validate(self, tol: float = 1e-9) -> "HalfFlatPair":
        res = self.residuals()
        failures = []
        if res["commutator"] > 1e-10 + tol:
            failures.append(f"[Q,P] relative norm {res['commutator']:.3g}")
        if res["lambda"] >= 0.0:
            failures.append(f"lambda(c,Q) = {res['lambda']:.3g} >= 0")
        if res["trP3"] == 0.0:
            failures.append("tr(P^3) = 0")
        if res["normalization"] > tol:
            failures.append(f"normalization residual {res['normalization']:.3g}")
        if failures:
            raise NotHalfFlat(failures)
        return self

    def hamiltonian(self) -> float:
        return hamiltonian_qp(self.Q, self.P, self.a, self.b)


def hamiltonian(pair: HalfFlatPair) -> float:
    return pair.hamiltonian()


# ---------------------------------------------------------------------------
# forms <-> matrices

def pair_from_forms(omega: forms6.Form, gamma: forms6.Form,
                    tol: float = 1e-9) -> HalfFlatPair:
    """Encode a compatible normalized pair of forms as matrices.

    Q is the image of the exact-part coefficients of gamma, P the image of
    omega's mixed-block coefficients; with this convention gamma' = d(omega)
    is literally Q' = P.
    """
    failures = []
    scale_g = max(gamma.norm(), 1e-300)
    scale_o = max(omega.norm(), 1e-300)
    a = b = 0.0
    N = np.zeros((3, 3))
    try:
        a, b, N = forms6.exact_part_matrix(gamma, tol=tol)
    except Exception as exc:  # NotClosed / NotInvariantClass
        failures.append(str(exc))
    # omega must lie in the mixed block
    K = np.zeros((3, 3))
    rebuilt = np.zeros(len(forms6.INDICES[2]))
    for i in range(1, 4):
        for j in range(1, 4):
            c = omega.coeff(2 * i - 1, 2 * j)
            K[i - 1, j - 1] = c
            pos = forms6.INDEX_POS[2][tuple(sorted((2 * i - 1, 2 * j)))]
            sign = 1.0 if 2 * i - 1 < 2 * j else -1.0
            rebuilt[pos] += sign * c
    off_block = np.linalg.norm(omega.coeffs - rebuilt)
    if off_block > tol * scale_o:
        failures.append(f"omega outside the mixed block by {off_block:.3g}")
    if forms6.ext_d(forms6.wedge(omega, omega)).norm() > tol * scale_o ** 2:
        failures.append("d(omega^2) != 0")
    if forms6.wedge(gamma, omega).norm() > tol * scale_g * scale_o:
        failures.append("gamma ^ omega != 0")
    lam = forms6.hitchin_lambda(gamma)
    if lam >= 0.0:
        failures.append(f"lambda = {lam:.3g} >= 0")
    else:
        nres = forms6.normalization_residual_forms(omega, gamma)
        if abs(nres) > tol * max(abs(lam) ** 0.5, 1.0):
            failures.append(f"normalization residual {nres:.3g}")
    if failures:
        raise NotHalfFlat(failures)
    pair = HalfFlatPair(iso3to4(N), iso3to4(K), a, b)
    return pair.validate(tol=max(tol, 1e-9))


def forms_from_pair(pair: HalfFlatPair):
    """Reconstruct (omega, gamma) from a half-flat pair."""
    N = iso4to3(pair.Q)
    K = iso4to3(pair.P)
    omega_terms = {}
    gamma = pair.a * forms6.E135 + pair.b * forms6.E246
    for i in range(3):
        for j in range(3):
            omega_terms[(2 * (i + 1) - 1, 2 * (j + 1))] = K[i, j]
            if N[i, j] != 0.0:
                gamma = gamma + N[i, j] * forms6.ext_d(
                    forms6.Form.basis(2 * (i + 1) - 1, 2 * (j + 1)))
    omega = forms6.Form.from_terms(2, omega_terms)
    return omega, gamma


# ---------------------------------------------------------------------------
# torsion classification

@dataclass(frozen=True)
class TorsionClass:
    kind: str                   # Coupled | CoCoupled | W1W3 | NearlyKaehler | Generic
    alpha: float | None
    residuals: dict


def _prop_residual(A: np.ndarray, B: np.ndarray):
    """Relative residual of A being a multiple of B, and the multiplier."""
    nB = np.linalg.norm(B)
    nA = np.linalg.norm(A)
    if nB == 0.0 or nA == 0.0:
        return float("inf"), 0.0
    coef = float(np.tensordot(A, B) / np.tensordot(B, B))
    return float(np.linalg.norm(A - coef * B) / nA), coef


def classify_torsion(pair: HalfFlatPair, tol: float = 1e-8) -> TorsionClass:
    """Classify the intrinsic torsion of a half-flat pair.

    Coupled means P is a nonzero multiple of Q (and the class vanishes);
    co-coupled means Rhat is a multiple of (P^2)_0.  Both at once is the
    nearly-Kaehler case; co-coupled alone with nonzero class is the
    irreducible two-component type.
    """
    Q, P, a, b = pair.Q, pair.P, pair.a, pair.b
    res_c, coef_c = _prop_residual(P, Q)
    coupled_alpha = -2.0 / 3.0 * coef_c
    coupled = (res_c < tol and abs(coupled_alpha) > tol
               and abs(a) < tol and abs(b) < tol)
    try:
        RH = Rhat(Q, a, b)
        P2_0 = traceless(P @ P)
        res_cc, cc_alpha = _prop_residual(RH, P2_0)
        cocoupled = res_cc < tol and abs(cc_alpha) > tol
    except DegenerateStructure:
        res_cc, cc_alpha = float("inf"), 0.0
        cocoupled = False
    residuals = {"coupled": res_c, "cocoupled": res_cc}
    if coupled and cocoupled:
        return TorsionClass("NearlyKaehler", coupled_alpha, residuals)
    if coupled:
        return TorsionClass("Coupled", coupled_alpha, residuals)
    if cocoupled:
        if abs(a) > tol or abs(b) > tol:
            return TorsionClass("W1W3", cc_alpha, residuals)
        return TorsionClass("CoCoupled", cc_alpha, residuals)
    return TorsionClass("Generic", None, residuals)


# ---------------------------------------------------------------------------
# the invariant nearly-Kaehler algebraic system

def _nk_system(xyz: np.ndarray, at: float) -> np.ndarray:
    """Residual of the cubic system for diagonal nearly-Kaehler candidates."""
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    f1 = (y + z) * (2 * x + y + z) + at * y * z * (2 * x + y + z)
    f2 = (x + z) * (x + 2 * y + z) + at * x * z * (x + 2 * y + z)
    f3 = (x + y) * (x + y + 2 * z) + at * x * y * (x + y + 2 * z)
    return np.stack([f1, f2, f3], axis=-1)


def nk_solve(alpha_tilde: float = -2.0, box: float = 10.0, grid: int = 50,
             newton_steps: int = 60, tol: float = 1e-11):
    """All real solutions of the diagonal cubic system inside the search box.

    Returns a list of dicts with the raw root, the 4x4 diagonal, and the
    canonical (sorted) diagonal; duplicates under coordinate permutation are
    merged.  Solutions must satisfy the admissibility sign condition
    (x+y+z) * x * y > 0.
    """
    at = float(alpha_tilde)
    axis = np.linspace(-box, box, grid)
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)

    def system(p):
        return _nk_system(p, at)

    def jac_fd(p, h=1e-7):
        J = np.empty(p.shape[:-1] + (3, 3))
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            J[..., :, k] = (system(p + dp) - system(p - dp)) / (2 * h)
        return J

    cur = pts.copy()
    alive = np.ones(len(cur), dtype=bool)
    for _ in range(newton_steps):
        if not alive.any():
            break
        F = system(cur[alive])
        J = jac_fd(cur[alive])
        ok = np.abs(np.linalg.det(J)) > 1e-14
        step = np.zeros_like(F)
        if ok.any():
            step[ok] = np.linalg.solve(J[ok], F[ok][..., None])[..., 0]
        nxt = cur[alive] - np.clip(step, -1.0, 1.0)
        sub = alive.nonzero()[0]
        dead = ~ok | ~np.isfinite(nxt).all(axis=1) | (np.abs(nxt) > 4 * box).any(axis=1)
        cur[sub] = np.where(dead[:, None], cur[sub], nxt)
        done = np.linalg.norm(system(nxt), axis=1) < 0.01 * tol
        alive[sub[dead]] = False
        alive[sub[done & ~dead]] = False
    F = system(cur)
    mag = np.linalg.norm(cur, axis=1)
    # the system is quadratic+cubic, so residuals must be judged against the
    # point's own scale or everything near the origin looks like a root
    scale = np.maximum(mag ** 2 * (1.0 + abs(at) * mag), 1e-30)
    good = np.isfinite(F).all(axis=1) & (np.linalg.norm(F, axis=1) < tol * scale)
    roots = cur[good]
    # admissibility and box filters
    admissible = []
    for p in roots:
        x, y, z = p
        if max(abs(x), abs(y), abs(z)) > box or max(abs(x), abs(y), abs(z)) < 1e-6:
            continue
        if (x + y + z) * x * y <= 0.0:
            continue
        admissible.append(p)
    # dedupe under coordinate permutation of the induced 4x4 diagonal
    out = []
    seen = set()
    for p in admissible:
        x, y, z = p
        diag = np.array([-x - y - z, x, y, z])
        key = tuple(np.round(np.sort(diag), 7))
        if key in seen:
            continue
        seen.add(key)
        out.append({"xyz": tuple(p), "diag": diag,
                    "canonical": np.sort(diag)[::-1]})
    out.sort(key=lambda d: tuple(d["canonical"]))
    return out


# ---------------------------------------------------------------------------
# adjugate square root

def adj_sqrt(M) -> np.ndarray:
    """The unique (up to sign) K with Adj(K) = M, for det(M) > 0.

    The representative returned has det(K) = +sqrt(det M); closed form
    K = sqrt(det M) * M^-1.
    """
    M = np.asarray(M, dtype=float)
    d = np.linalg.det(M)
    if d <= 0.0:
        raise NonPositiveDeterminant(f"det = {d:.6g}")
    return math.sqrt(d) * np.linalg.inv(M)
