import itertools
import math

import numpy as np
import pytest

from hflow import forms6


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


# ---------------------------------------------------------------------------
# independent brute-force oracle for the exterior algebra: forms as fully
# antisymmetric tensors, wedge via antisymmetrized tensor products

def form_to_full_tensor(form: forms6.Form) -> np.ndarray:
    k = form.degree
    T = np.zeros((6,) * k) if k > 0 else np.array(form.coeffs[0])
    if k == 0:
        return T
    for pos, idx in enumerate(forms6.INDICES[k]):
        c = form.coeffs[pos]
        if c == 0.0:
            continue
        base = tuple(i - 1 for i in idx)
        for perm in itertools.permutations(range(k)):
            sign = perm_sign(perm)
            T[tuple(base[p] for p in perm)] = sign * c
    return T


def perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def oracle_wedge(a: forms6.Form, b: forms6.Form) -> forms6.Form:
    """Wedge by explicit antisymmetrization of the tensor product."""
    k, l = a.degree, b.degree
    n = k + l
    if n > 6:
        return forms6.Form(n)
    Ta = form_to_full_tensor(a)
    Tb = form_to_full_tensor(b)
    coeffs = np.zeros(len(forms6.INDICES[n]))
    norm = 1.0 / (math.factorial(k) * math.factorial(l))
    for pos, idx in enumerate(forms6.INDICES[n]):
        base = tuple(i - 1 for i in idx)
        total = 0.0
        for perm in itertools.permutations(range(n)):
            sign = perm_sign(perm)
            pidx = tuple(base[p] for p in perm)
            va = Ta[pidx[:k]] if k > 0 else float(Ta)
            vb = Tb[pidx[k:]] if l > 0 else float(Tb)
            total += sign * va * vb
        coeffs[pos] = total * norm
    return forms6.Form(n, coeffs)


@pytest.fixture
def wedge_oracle():
    return oracle_wedge
