"""Invariant exterior algebra on su(2) + su(2).

All forms live on a fixed 6-dimensional coframe e1..e6, with the odd
covectors spanning one su(2)* factor and the even covectors the other.
The exterior derivative is the Chevalley-Eilenberg differential fixed by

    de1 = e35,  de3 = e51,  de5 = e13,
    de2 = e46,  de4 = e62,  de6 = e24,

which is the unique cyclic completion compatible with d(e34) = e514 - e362
and d(e56) = e136 - e524.  A k-form is stored as the coefficient vector
over lexicographically sorted multi-indices.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import NotClosed, NotInvariantClass, NotPrimitive, NotStable

DIM = 6

#: sorted multi-indices (1-based) for each degree; empty beyond degree 6
INDICES = {k: [tuple(c) for c in itertools.combinations(range(1, DIM + 1), k)]
           for k in range(0, 13)}
INDEX_POS = {k: {idx: pos for pos, idx in enumerate(v)} for k, v in INDICES.items()}

# d of the basis covectors: covector -> (sign, sorted 2-index)
_STRUCTURE = {
    1: (1.0, (3, 5)),
    2: (1.0, (4, 6)),
    3: (-1.0, (1, 5)),
    4: (-1.0, (2, 6)),
    5: (1.0, (1, 3)),
    6: (1.0, (2, 4)),
}

_VOL_INDEX = (1, 2, 3, 4, 5, 6)


def merge_sign(I, J):
    """Sign of sorting the concatenation of two disjoint sorted index tuples.

    Returns 0 when the tuples share an index.
    """
    if set(I) & set(J):
        return 0
    inversions = 0
    for a in I:
        for b in J:
            if a > b:
                inversions += 1
    return -1 if inversions % 2 else 1


class Form:
    """Homogeneous invariant form; immutable after construction."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs=None):
        if degree < 0:
            raise ValueError("negative form degree")
        n = len(INDICES[degree]) if degree <= 12 else 0
        if coeffs is None:
            c = np.zeros(n)
        else:
            c = np.asarray(coeffs, dtype=float).copy()
            if c.shape != (n,):
                raise ValueError(f"degree {degree} needs {n} coefficients, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, *_):
        raise AttributeError("Form is immutable")

    @classmethod
    def from_terms(cls, degree: int, terms: dict) -> "Form":
        """Build a form from {multi-index: coefficient}.

        Indices may be tuples in any order (the sorting sign is applied) or
        strings like "135".
        """
        c = np.zeros(len(INDICES[degree]))
        for idx, val in terms.items():
            if isinstance(idx, str):
                idx = tuple(int(ch) for ch in idx)
            idx = tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} has wrong length for degree {degree}")
            srt = tuple(sorted(idx))
            if len(set(srt)) != degree:
                continue  # repeated index wedges to zero
            sign = _permutation_sign(idx, srt)
            c[INDEX_POS[degree][srt]] += sign * val
        return cls(degree, c)

    @classmethod
    def basis(cls, *idx) -> "Form":
        """Basis monomial e^{i1...ik} for a sorted index tuple."""
        return cls.from_terms(len(idx), {tuple(idx): 1.0})

    def coeff(self, *idx) -> float:
        idx = tuple(idx[0]) if len(idx) == 1 and isinstance(idx[0], (tuple, str)) else idx
        if isinstance(idx, str):
            idx = tuple(int(ch) for ch in idx)
        srt = tuple(sorted(idx))
        sign = _permutation_sign(tuple(idx), srt)
        return sign * float(self.coeffs[INDEX_POS[self.degree][srt]])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        self._check(other)
        return Form(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return Form(self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return Form(self.degree, -self.coeffs)

    def __mul__(self, s):
        return Form(self.degree, self.coeffs * float(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return Form(self.degree, self.coeffs / float(s))

    def _check(self, other):
        if not isinstance(other, Form) or other.degree != self.degree:
            raise ValueError("degree mismatch")

    def __repr__(self):
        return f"Form({self.degree}, {pretty(self)!r})"


def _permutation_sign(idx, srt):
    perm = list(idx)
    sign = 1
    for i in range(len(perm)):
        for j in range(len(perm) - 1 - i):
            if perm[j] > perm[j + 1]:
                perm[j], perm[j + 1] = perm[j + 1], perm[j]
                sign = -sign
    if tuple(perm) != srt:
        return 0
    return sign


def pretty(form: Form, tol: float = 0.0) -> str:
    """Render a form as a signed monomial sum, e.g. '+2 e135 -1 e246'."""
    parts = []
    for pos, idx in enumerate(INDICES[form.degree]):
        c = form.coeffs[pos]
        if abs(c) <= tol:
            continue
        label = "e" + "".join(str(i) for i in idx) if idx else "1"
        parts.append(f"{'+' if c >= 0 else '-'}{abs(c):g} {label}")
    return " ".join(parts) if parts else "0"


@lru_cache(maxsize=None)
def _wedge_table(k: int, l: int):
    """COO triples (pos_a, pos_b, sign, pos_out) for the wedge Λk x Λl -> Λ(k+l)."""
    rows_a, rows_b, signs, outs = [], [], [], []
    out_deg = k + l
    for ia, I in enumerate(INDICES[k]):
        for ib, J in enumerate(INDICES[l]):
            s = merge_sign(I, J)
            if s == 0:
                continue
            target = tuple(sorted(I + J))
            rows_a.append(ia)
            rows_b.append(ib)
            signs.append(float(s))
            outs.append(INDEX_POS[out_deg][target])
    return (np.array(rows_a, dtype=np.intp), np.array(rows_b, dtype=np.intp),
            np.array(signs), np.array(outs, dtype=np.intp))


def wedge(a: Form, b: Form) -> Form:
    """Wedge product; graded anticommutative, zero form above top degree."""
    k, l = a.degree, b.degree
    out = np.zeros(len(INDICES[k + l]))
    ia, ib, s, pos = _wedge_table(k, l)
    if len(pos):
        np.add.at(out, pos, s * a.coeffs[ia] * b.coeffs[ib])
    return Form(k + l, out)


@lru_cache(maxsize=None)
def _d_matrix(k: int):
    """Matrix of the exterior derivative on degree-k basis monomials."""
    n_in = len(INDICES[k])
    n_out = len(INDICES[k + 1])
    D = np.zeros((n_out, n_in))
    for col, I in enumerate(INDICES[k]):
        for m, im in enumerate(I):
            sgn_im, dJ = _STRUCTURE[im]
            rest = I[:m] + I[m + 1:]
            # d(e^I) = sum_m (-1)^(m) e^{i1..im-1} ^ d(e^im) ^ e^{im+1..}
            s_rest = merge_sign(dJ, rest)
            if s_rest == 0:
                continue
            target = tuple(sorted(dJ + rest))
            D[INDEX_POS[k + 1][target], col] += ((-1) ** m) * sgn_im * s_rest
    return D


def ext_d(a: Form) -> Form:
    """Exterior derivative (Leibniz extension of the structure equations)."""
    if a.degree >= DIM:
        return Form(a.degree + 1)
    return Form(a.degree + 1, _d_matrix(a.degree) @ a.coeffs)


def form_to_tensor3(gamma: Form) -> np.ndarray:
    """Fully antisymmetric (6,6,6) tensor of a 3-form."""
    if gamma.degree != 3:
        raise ValueError("need a 3-form")
    T = np.zeros((DIM, DIM, DIM))
    for pos, (i, j, k) in enumerate(INDICES[3]):
        c = gamma.coeffs[pos]
        if c == 0.0:
            continue
        i, j, k = i - 1, j - 1, k - 1
        T[i, j, k] = T[j, k, i] = T[k, i, j] = c
        T[j, i, k] = T[i, k, j] = T[k, j, i] = -c
    return T


def tensor3_to_form(T: np.ndarray) -> Form:
    c = np.empty(len(INDICES[3]))
    for pos, (i, j, k) in enumerate(INDICES[3]):
        c[pos] = T[i - 1, j - 1, k - 1]
    return Form(3, c)


def form2_to_matrix(omega: Form) -> np.ndarray:
    """Antisymmetric 6x6 matrix W with omega(X, Y) = X^T W Y."""
    if omega.degree != 2:
        raise ValueError("need a 2-form")
    W = np.zeros((DIM, DIM))
    for pos, (i, j) in enumerate(INDICES[2]):
        W[i - 1, j - 1] = omega.coeffs[pos]
        W[j - 1, i - 1] = -omega.coeffs[pos]
    return W


def volume_coefficient(top: Form) -> float:
    """Coefficient of e123456 in a 6-form."""
    if top.degree != DIM:
        raise ValueError("need a 6-form")
    return float(top.coeffs[0])


def stabilizer_endomorphism(gamma: Form) -> np.ndarray:
    """Endomorphism K of a 3-form, defined by i(Kv) vol = i(v) gamma ^ gamma.

    K is trace-free and satisfies K^2 = lambda * Id on stable forms.
    """
    T = form_to_tensor3(gamma)
    K = np.zeros((DIM, DIM))
    ia, ib, s, pos = _wedge_table(2, 3)
    n5 = len(INDICES[5])
    for m in range(DIM):
        # i(e_{m+1}) gamma as a 2-form coefficient vector
        two = np.array([T[m, i - 1, j - 1] for (i, j) in INDICES[2]])
        five = np.zeros(n5)
        np.add.at(five, pos, s * two[ia] * gamma.coeffs[ib])
        for n in range(DIM):
            comp = tuple(x for x in _VOL_INDEX if x != n + 1)
            # i(e_{n+1}) vol = (-1)^n e^comp
            K[n, m] = ((-1) ** n) * five[INDEX_POS[5][comp]]
    return K


def hitchin_lambda(gamma: Form) -> float:
    """Quartic invariant of a 3-form; negative exactly on the complex type."""
    K = stabilizer_endomorphism(gamma)
    return float(np.trace(K @ K)) / 6.0


def almost_complex_structure(gamma: Form) -> np.ndarray:
    """J = K / sqrt(-lambda); raises NotStable when lambda >= 0."""
    K = stabilizer_endomorphism(gamma)
    lam = float(np.trace(K @ K)) / 6.0
    if lam >= 0.0:
        raise NotStable(f"lambda = {lam:.6g} is not negative")
    return K / math.sqrt(-lam)


def hitchin_dual(gamma: Form) -> Form:
    """Dual 3-form: the unique form with gamma + i*dual of type (3,0).

    Sign convention fixed so that the hat of x*d(omega0) + a*(e135 - e246)
    carries the exact six-term block with coefficient proportional to x.
    """
    J = almost_complex_structure(gamma)
    T = form_to_tensor3(gamma)
    # -gamma(J.,.,.) symmetrized over the three slots (equal on stable forms)
    G = np.einsum("mi,mjk->ijk", J, T)
    G = G + np.einsum("mj,imk->ijk", J, T) + np.einsum("mk,ijm->ijk", J, T)
    return tensor3_to_form(-G / 3.0)


def su3_metric(omega: Form, gamma: Form, primitivity_tol: float = 1e-10):
    """Symmetric form g(X, Y) = omega(X, JY) of a compatible pair.

    Returns a MetricTensor whose `definite` flag records positive
    definiteness; raises NotStable / NotPrimitive when the pair is not an
    almost-Hermitian candidate.
    """
    from .curvature import MetricTensor

    scale = omega.norm() * gamma.norm()
    prim = wedge(gamma, omega)
    if prim.norm() > primitivity_tol * max(scale, 1e-300):
        raise NotPrimitive(f"|gamma^omega| = {prim.norm():.3g}")
    J = almost_complex_structure(gamma)
    W = form2_to_matrix(omega)
    g = W @ J
    asym = np.linalg.norm(g - g.T)
    g = 0.5 * (g + g.T)
    eigs = np.linalg.eigvalsh(g)
    return MetricTensor(g, definite=bool(eigs[0] > 0.0), min_eig=float(eigs[0]),
                        asymmetry=float(asym))


def normalization_residual_forms(omega: Form, gamma: Form) -> float:
    """Coefficient of e123456 in 3*gamma^dual(gamma) - 2*omega^3."""
    ghat = hitchin_dual(gamma)  # raises NotStable when lambda >= 0
    lhs = 3.0 * wedge(gamma, ghat)
    rhs = 2.0 * wedge(omega, wedge(omega, omega))
    return volume_coefficient(lhs - rhs)


# ---------------------------------------------------------------------------
# closed 3-forms: class extraction

# exact generators d(e^{2i-1} ^ e^{2j}), i, j in {1,2,3}, row-major in (i, j)
_AB_PAIRS = [(2 * i - 1, 2 * j) for i in range(1, 4) for j in range(1, 4)]


@lru_cache(maxsize=None)
def _closed_basis():
    cols = [Form.basis(1, 3, 5).coeffs, Form.basis(2, 4, 6).coeffs]
    for (o, e) in _AB_PAIRS:
        cols.append(ext_d(Form.basis(o, e)).coeffs)
    return np.stack(cols, axis=1)  # 20 x 11


def exact_part_matrix(gamma: Form, tol: float = 1e-9):
    """Split a closed 3-form as a*e135 + b*e246 + sum N_ij d(e^{2i-1}^e^{2j}).

    Returns (a, b, N) with N the 3x3 coefficient matrix of the exact part.
    """
    if gamma.degree != 3:
        raise ValueError("need a 3-form")
    scale = max(gamma.norm(), 1e-300)
    dg = ext_d(gamma)
    if dg.norm() > tol * scale:
        raise NotClosed(f"|d gamma| = {dg.norm():.3g}")
    B = _closed_basis()
    sol, *_ = np.linalg.lstsq(B, gamma.coeffs, rcond=None)
    resid = np.linalg.norm(B @ sol - gamma.coeffs)
    if resid > tol * scale:
        raise NotInvariantClass(f"decomposition residual {resid:.3g}")
    a, b = float(sol[0]), float(sol[1])
    N = sol[2:].reshape(3, 3)
    return a, b, N


def cohomology_class(gamma: Form, tol: float = 1e-9):
    """Class (a, b) of a closed 3-form relative to e135, e246."""
    a, b, _ = exact_part_matrix(gamma, tol=tol)
    return a, b


# convenient fixed forms
OMEGA0 = Form.from_terms(2, {(1, 2): 1.0, (3, 4): 1.0, (5, 6): 1.0})
E135 = Form.basis(1, 3, 5)
E246 = Form.basis(2, 4, 6)
VOL = Form.basis(1, 2, 3, 4, 5, 6)
