"""Built-in reference pairs used by the CLI and the verification suite."""

from __future__ import annotations

import math

import numpy as np

from . import forms6
from .forms6 import E135, E246, OMEGA0, Form, ext_d
from .matrix_param import HalfFlatPair, pair_from_forms

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)


def w1w3_positive_scalar(a: float = 1.0):
    """The positive-scalar-curvature pair of irreducible two-component
    torsion: omega = -(3/4) alpha a omega0, gamma = a (e135 - e246)
    + (a/2) d(omega0), with a alpha^3 = 8 sqrt(3)/9."""
    alpha = (8.0 * SQRT3 / (9.0 * a)) ** (1.0 / 3.0)
    omega = -(0.75 * alpha * a) * OMEGA0
    gamma = a * (E135 - E246) + 0.5 * a * ext_d(OMEGA0)
    return omega, gamma, {"alpha": alpha, "a": a}


def w1w3_zero_scalar(b: float = 1.0):
    """The zero-scalar-curvature pair: gamma = sqrt(5) b (e135 - e246)
    + b d(omega0), omega = a omega0 with a^3 = -sqrt(2 (1 + sqrt 5)) b^2."""
    a = -((2.0 * (1.0 + SQRT5)) ** (1.0 / 6.0)) * b ** (2.0 / 3.0)
    omega = a * OMEGA0
    gamma = SQRT5 * b * (E135 - E246) + b * ext_d(OMEGA0)
    return omega, gamma, {"a": a, "b": b}


def nearly_kaehler_pair(q: float = 1.0) -> HalfFlatPair:
    """The unique invariant nearly-Kaehler pair at scale q (normalized)."""
    D = np.diag([-3.0, 1.0, 1.0, 1.0])
    p = -((SQRT3 * q * q) / 2.0) ** (1.0 / 3.0)
    return HalfFlatPair(q * D, p * D, 0.0, 0.0).validate()


def family_pair(x: float, a: float):
    """omega = -(3/2) alpha x omega0, gamma = x d(omega0) + a (e135 - e246)
    with alpha fixed by the normalization 27 alpha^3 x^3
    = 4 sqrt((3x-a)(x+a)^3)."""
    rad = (3.0 * x - a) * (x + a) ** 3
    if rad <= 0.0:
        raise ValueError("need (3x - a)(x + a)^3 > 0")
    alpha = (4.0 * math.sqrt(rad)) ** (1.0 / 3.0) / (3.0 * x)
    omega = -(1.5 * alpha * x) * OMEGA0
    gamma = x * ext_d(OMEGA0) + a * (E135 - E246)
    return omega, gamma, {"alpha": alpha}


def builtin_pair(name: str) -> HalfFlatPair:
    """Resolve a named example to a validated half-flat pair."""
    key = name.lower()
    if key in ("w1w3-positive-scalar", "ex2.2"):
        omega, gamma, _ = w1w3_positive_scalar()
        return pair_from_forms(omega, gamma)
    if key in ("w1w3-zero-scalar", "ex2.3"):
        omega, gamma, _ = w1w3_zero_scalar()
        return pair_from_forms(omega, gamma)
    if key in ("nearly-kaehler", "nk"):
        return nearly_kaehler_pair()
    raise KeyError(f"unknown example {name!r}; choose from "
                   "w1w3-positive-scalar (ex2.2), w1w3-zero-scalar (ex2.3), "
                   "nearly-kaehler (nk)")
