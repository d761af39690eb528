"""Verification suite: one callable per acceptance criterion.

Each criterion function returns a dict with `name`, `passed`, `details` and
`seconds`; `run_all` executes them in order.  The CLI `verify` subcommand
prints one line per criterion and exits nonzero on any failure.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import curvature, examples_builtin, flow, forms6, matrix_param, sweep
from .flow import AnsatzKind

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)


def _result(name, passed, details, t_start):
    return {"name": name, "passed": bool(passed), "details": details,
            "seconds": round(time.perf_counter() - t_start, 3)}


def criterion_table1(seed: int = 12345):
    """Invariant/covariant dictionary on 1000 random matrices."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for K in rng.normal(size=(1000, 3, 3)):
        worst = max(worst, float(matrix_param.dictionary_residuals(K).max()))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 1.0
    return _result("table1_dictionary", ok,
                   f"max residual {worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 1s)", t0)


def criterion_w1w3_positive():
    """Regression of the positive-scalar two-component example."""
    t0 = time.perf_counter()
    checks = []
    # quartic invariant at a = 2
    _, gamma2, _ = examples_builtin.w1w3_positive_scalar(a=2.0)
    lam = forms6.hitchin_lambda(gamma2)
    checks.append(("lambda", abs(lam + 27.0) < 1e-10, f"{lam:.12f} vs -27"))
    # dual form coefficientwise at general a
    a = 2.0
    ghat = forms6.hitchin_dual(gamma2)
    expected = forms6.Form.from_terms(3, {
        (3, 5, 2): 1.0, (1, 4, 6): 1.0, (5, 1, 4): 1.0,
        (3, 6, 2): 1.0, (1, 3, 6): 1.0, (5, 2, 4): 1.0}) * (-(SQRT3 / 2.0) * a)
    dual_err = (ghat - expected).norm()
    checks.append(("dual", dual_err < 1e-12 * ghat.norm() + 1e-14,
                   f"coefficient error {dual_err:.2e}"))
    # normalization residual
    omega, gamma, info = examples_builtin.w1w3_positive_scalar(a=1.0)
    res = forms6.normalization_residual_forms(omega, gamma)
    checks.append(("normalization", abs(res) < 1e-12, f"residual {res:.2e}"))
    # scalar curvature = (3/2) alpha^2
    g = forms6.su3_metric(omega, gamma)
    s = curvature.ricci_scalar(g)
    target = 1.5 * info["alpha"] ** 2
    checks.append(("scalar", abs(s - target) < 1e-9, f"{s:.12f} vs {target:.12f}"))
    # classification
    pair = matrix_param.pair_from_forms(omega, gamma)
    cls = matrix_param.classify_torsion(pair)
    checks.append(("class", cls.kind == "W1W3", cls.kind))
    elapsed = time.perf_counter() - t0
    ok = all(c[1] for c in checks) and elapsed < 1.0
    details = "; ".join(f"{n}: {'ok' if p else 'FAIL'} ({d})" for n, p, d in checks)
    return _result("w1w3_positive_scalar", ok, details + f"; {elapsed:.2f}s", t0)


def criterion_w1w3_zero():
    """Regression of the zero-scalar two-component example."""
    t0 = time.perf_counter()
    omega, gamma, _ = examples_builtin.w1w3_zero_scalar(b=1.0)
    lam = forms6.hitchin_lambda(gamma)
    target = -8.0 * (1.0 + SQRT5)
    ok_lam = abs(lam - target) < 1e-10
    g = forms6.su3_metric(omega, gamma)
    s = curvature.ricci_scalar(g)
    ok_s = abs(s) < 1e-8
    pair = matrix_param.pair_from_forms(omega, gamma)
    cls = matrix_param.classify_torsion(pair)
    ok = ok_lam and ok_s and cls.kind == "W1W3"
    return _result("w1w3_zero_scalar", ok,
                   f"lambda {lam:.10f} vs {target:.10f}; scalar {s:.2e} "
                   f"(tol 1e-8); class {cls.kind}", t0)


def criterion_nk_cone():
    """Cone solution: conserved level set, tracking, and flow along the line."""
    t0 = time.perf_counter()
    # H identically zero on the closed form
    h_max = max(abs(flow.closed_nk_cone(t).hamiltonian())
                for t in np.linspace(0.5, 5.0, 40))
    ok_h = h_max < 1e-12
    # RK4 h = 1e-3 tracks the closed form over one unit of t
    traj = flow.integrate(flow.closed_nk_cone(1.0), 2.0, step=1e-3,
                          sample_every=100, compute_scalar=False)
    err = 0.0
    for i in range(traj.n_samples):
        ref = flow.closed_nk_cone(traj.times[i])
        st = traj.state_at(i)
        err = max(err, float(np.abs(st.Q - ref.Q).max()),
                  float(np.abs(st.P - ref.P).max()))
    ok_track = traj.termination == "Completed" and err < 1e-6
    # the diagonal line is preserved from (1,1,1) with the distinguished velocity
    nu = flow.nk_velocity()
    st = flow.init_three_function(nu, nu, nu)
    line = flow.integrate(st, -3.0, step=1e-3, sample_every=50,
                          compute_scalar=False)
    off = max(float(np.abs(line.coords[:, 0] - line.coords[:, 1]).max()),
              float(np.abs(line.coords[:, 0] - line.coords[:, 2]).max()))
    ok_line = off < 1e-9
    ok = ok_h and ok_track and ok_line
    return _result("nk_cone_flow", ok,
                   f"max|H| {h_max:.2e} (tol 1e-12); tracking {err:.2e} "
                   f"(tol 1e-6); off-line {off:.2e} (tol 1e-9)", t0)


def criterion_family_closed_form():
    """Explicit one-parameter family: system residual, zero-scalar point,
    and the proportional-4-form identity along the flow."""
    t0 = time.perf_counter()
    worst_sys = 0.0
    for a in (1.0, -(5.0 + SQRT5)):
        s_hi = min(0.0, -np.cbrt(a)) - 0.05
        for s in np.linspace(s_hi - 3.0, s_hi, 20):
            x, al, dtds = flow.closed_section4(s, a)
            dx, dal = flow.closed_section4_derivs(s, a)
            dx_dt = dx / dtds
            dal_dt = dal / dtds
            r1 = dx_dt + 1.5 * al * x
            r2 = dal_dt - (1.5 * al * al - (4.0 / 9.0) / (al * x)
                           * math.sqrt((x + a) / (3.0 * x - a)))
            worst_sys = max(worst_sys, abs(r1) / max(1.0, abs(dx_dt)),
                            abs(r2) / max(1.0, abs(dal_dt)))
    ok_sys = worst_sys < 1e-10
    # zero scalar curvature at the distinguished parameter
    a = -(5.0 + SQRT5)
    s_star = -abs((1.0 - SQRT5) / 2.0) ** (1.0 / 3.0)
    x, al, _ = flow.closed_section4(s_star, a)
    omega, gamma, _ = examples_builtin.family_pair(x, a)
    s_val = curvature.ricci_scalar(forms6.su3_metric(omega, gamma))
    ok_zero = abs(s_val) < 1e-8
    # d(dual) = A omega^2 along the family
    worst_prop = 0.0
    for s in np.linspace(-2.5, -0.7, 8):
        x, al, dtds = flow.closed_section4(s, a)
        dx, dal = flow.closed_section4_derivs(s, a)
        alx_dot = (dal * x + al * dx) / dtds
        A = -alx_dot / (al * x)
        omega, gamma, _ = examples_builtin.family_pair(x, a)
        dghat = forms6.ext_d(forms6.hitchin_dual(gamma))
        target = A * forms6.wedge(omega, omega)
        worst_prop = max(worst_prop, (dghat - target).norm() / dghat.norm())
    ok_prop = worst_prop < 1e-9
    ok = ok_sys and ok_zero and ok_prop
    return _result("family_closed_form", ok,
                   f"system residual {worst_sys:.2e} (tol 1e-10); zero-scalar "
                   f"{s_val:.2e} (tol 1e-8); co-coupled identity {worst_prop:.2e} "
                   f"(tol 1e-9)", t0)


def criterion_abc():
    """Explicit circle-bundle-over-cone solution: flow and superpotential."""
    t0 = time.perf_counter()
    worst_flow = 0.0
    worst_sp = 0.0
    for s in np.linspace(5.0, 10.0, 26):
        f = flow.closed_abc(s)
        a_i = np.array([f["a"], f["a"], f["a3"]])
        b_i = np.array([f["b"], f["b"], f["b3"]])
        da, db = flow.triaxial_rhs(a_i, b_i)
        b3 = f["b3"]
        exp_da = b3 * np.array([f["da_ds"], f["da_ds"], f["da3_ds"]])
        exp_db = b3 * np.array([f["db_ds"], f["db_ds"], f["db3_ds"]])
        scale = max(np.abs(exp_da).max(), np.abs(exp_db).max(), 1.0)
        worst_flow = max(worst_flow, float(np.abs(da - exp_da).max() / scale),
                         float(np.abs(db - exp_db).max() / scale))
        dt_ds = f["dt_ds"]
        funcs = (f["a"], f["b"], f["a3"], f["b3"])
        dfun = (f["da_ds"] / dt_ds, f["db_ds"] / dt_ds,
                f["da3_ds"] / dt_ds, f["db3_ds"] / dt_ds)
        resid = curvature.superpotential_flow_residual(funcs, dfun)
        scale_sp = 8.0 * funcs[0] ** 2 * funcs[1] ** 2 * funcs[2] * funcs[3]
        worst_sp = max(worst_sp, resid / max(1.0, scale_sp))
    ok = worst_flow < 1e-8 and worst_sp < 1e-6
    return _result("abc_brandhuber", ok,
                   f"flow residual {worst_flow:.2e} (tol 1e-8); superpotential "
                   f"residual {worst_sp:.2e} (tol 1e-6)", t0)


def _drift_trajectories(n_vel: int = 20, t_end: float = -0.97):
    pts = sweep.mesh_T(7)
    stride = max(1, len(pts) // n_vel)
    chosen = pts[::stride][:n_vel]
    out = []
    for (x, y, z) in chosen:
        st = flow.init_three_function(x, y, z)
        out.append(flow.integrate(st, t_end, step=1e-3, sample_every=20,
                                  compute_scalar=False))
    return out


def criterion_invariant_drift():
    """Generic trajectories keep the level set, commutation and the volume
    identity until termination."""
    t0 = time.perf_counter()
    trajs = _drift_trajectories()
    worst_h = worst_comm = worst_vol = 0.0
    for tr in trajs:
        elapsed = max(abs(tr.t_final - tr.times[0]), 1e-30)
        worst_h = max(worst_h, float(np.abs(tr.hamiltonian).max())
                      / max(1.0, elapsed))
        worst_comm = max(worst_comm, float(np.abs(tr.comm_norm).max()))
        for i in range(tr.n_samples):
            g = tr.metric_at(i)
            root = math.sqrt(np.linalg.det(g))
            target = 0.5 * tr.sqrt_neg_lam[i]
            worst_vol = max(worst_vol, abs(root - target) / target)
    ok = worst_h < 1e-7 and worst_comm < 1e-10 and worst_vol < 1e-8
    return _result("invariant_drift", ok,
                   f"|H| per unit t {worst_h:.2e} (tol 1e-7); commutator "
                   f"{worst_comm:.2e} (tol 1e-10); volume identity "
                   f"{worst_vol:.2e} (tol 1e-8, sqrt(det g) = sqrt(-lambda)/2)",
                   t0)


def criterion_conservation():
    """Cohomogeneity-one conservation law along the drift trajectories."""
    t0 = time.perf_counter()
    worst = 0.0
    for tr in _drift_trajectories(n_vel=20):
        for i in range(0, tr.n_samples, 2):
            g, gp = tr.metric_and_derivative(i)
            sd = curvature.shape_operator(g, gp)
            val = sd.trL ** 2 - sd.trL2 - sd.scalar
            scale = max(1.0, abs(sd.trL) ** 2, abs(sd.trL2), abs(sd.scalar))
            worst = max(worst, abs(val) / scale)
    ok = worst < 1e-6
    return _result("conservation_law", ok,
                   f"max relative residual {worst:.2e} (tol 1e-6)", t0)


def criterion_nk_solver():
    """The diagonal algebraic system has exactly one family of solutions."""
    t0 = time.perf_counter()
    alpha_tilde = -2.0
    sols = matrix_param.nk_solve(alpha_tilde=alpha_tilde)
    x_expected = -2.0 / alpha_tilde
    ok = len(sols) == 1
    details = f"{len(sols)} solution families"
    if ok:
        canon = sols[0]["canonical"]
        target = np.sort(np.array([-3.0, 1.0, 1.0, 1.0]) * x_expected)[::-1]
        err = float(np.abs(canon - target).max())
        # consistency with the proportionality-constant relation
        alpha3 = -16.0 / (9.0 * alpha_tilde * SQRT3 * x_expected ** 2)
        x_rel = 8.0 / (9.0 * SQRT3 * alpha3)
        ok = err < 1e-6 and abs(x_rel - x_expected) < 1e-12
        details += f"; canonical error {err:.2e}; x = {x_expected}"
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 30.0
    return _result("nk_uniqueness_solver", ok, details + f"; {elapsed:.1f}s (< 30s)", t0)


def criterion_sweep(tmp_dir: str | None = None, workers: int = 4):
    """Sweep reproduction: completion rate, singular-time statistics, the
    planar class split, and determinism across worker counts."""
    import filecmp
    import tempfile

    t0 = time.perf_counter()
    base = tmp_dir or tempfile.mkdtemp(prefix="hflow_accept_")
    # resolution-30 mesh, extended range
    cfg = sweep.SweepConfig(ansatz="three", resolution=30, t0=-3.0, t1=0.0,
                            sample_every=25, workers=workers,
                            out_dir=f"{base}/mesh30")
    manifest = sweep.run_sweep(cfg)
    recs = manifest["trajectories"]
    n = len(recs)
    reached = sum(1 for r in recs
                  if r["termination_neg"] == "Completed" or r["t_final_neg"] <= -0.97)
    frac_complete = reached / n
    degen = [r["t_final_neg"] for r in recs
             if r["termination_neg"] == "DegenerateStructure"]
    frac_degen = len(degen) / n
    med = float(np.median(degen)) if degen else 0.0
    near = sum(1 for t in degen if -1.75 <= t <= -0.97) / max(len(degen), 1)
    ok_complete = frac_complete >= 0.95
    ok_degen = frac_degen > 0.5 and -2.5 <= med <= -1.0 and near >= 0.25
    # two-function class split at the distinguished velocity
    nu = flow.nk_velocity()
    xs = np.linspace(-1.9, -0.08, 20)
    split_ok = True
    for x in xs:
        st = flow.init_two_function(float(x), flow.two_function_curve_y(float(x)))
        legs = [flow.integrate(st, end, step=1e-3, sample_every=400,
                               compute_scalar=False) for end in (-12.0, 12.0)]
        complete = [tr for tr in legs if tr.termination == "Completed"]
        is_abc = False
        if len(complete) == 1:
            tr = complete[0]
            me = tr.min_metric_eig
            slope = abs(math.log(me[-1] / me[-3])
                        / (tr.times[-1] - tr.times[-3]))
            is_abc = me[-1] > 0.0 and slope < 0.15
        if is_abc != (nu < x < 0.0):
            split_ok = False
    # determinism across worker counts
    cfg1 = sweep.SweepConfig(ansatz="three", resolution=6, t0=-0.3, t1=0.0,
                             sample_every=10, workers=1, out_dir=f"{base}/det1")
    cfg2 = sweep.SweepConfig(ansatz="three", resolution=6, t0=-0.3, t1=0.0,
                             sample_every=10, workers=2, out_dir=f"{base}/det2")
    m1 = sweep.run_sweep(cfg1)
    m2 = sweep.run_sweep(cfg2)
    det_ok = True
    for rec in m1["trajectories"]:
        f1 = f"{base}/det1/{rec['csv']}"
        f2 = f"{base}/det2/{rec['csv']}"
        if not filecmp.cmp(f1, f2, shallow=False):
            det_ok = False
    for key in ("trajectories", "n_trajectories"):
        if m1[key] != m2[key]:
            det_ok = False
    elapsed = time.perf_counter() - t0
    ok = ok_complete and ok_degen and split_ok and det_ok and elapsed < 120.0
    return _result(
        "sweep_reproduction", ok,
        f"{n} trajectories; complete through -0.97: {100 * frac_complete:.1f}% "
        f"(need 95%); degenerate: {100 * frac_degen:.0f}% (need >50%), median "
        f"singular time {med:.2f} (window [-2.5, -1.0]), near -1 fraction "
        f"{near:.2f} (need 0.25); planar split at nu: "
        f"{'ok' if split_ok else 'FAIL'}; determinism: "
        f"{'ok' if det_ok else 'FAIL'}; {elapsed:.0f}s (< 120s)", t0)


CRITERIA = [
    criterion_table1,
    criterion_w1w3_positive,
    criterion_w1w3_zero,
    criterion_nk_cone,
    criterion_family_closed_form,
    criterion_abc,
    criterion_invariant_drift,
    criterion_conservation,
    criterion_nk_solver,
    criterion_sweep,
]


#: names matching the criterion functions, for selective runs
CRITERION_NAMES = {
    "table1_dictionary": criterion_table1,
    "w1w3_positive_scalar": criterion_w1w3_positive,
    "w1w3_zero_scalar": criterion_w1w3_zero,
    "nk_cone_flow": criterion_nk_cone,
    "family_closed_form": criterion_family_closed_form,
    "abc_brandhuber": criterion_abc,
    "invariant_drift": criterion_invariant_drift,
    "conservation_law": criterion_conservation,
    "nk_uniqueness_solver": criterion_nk_solver,
    "sweep_reproduction": criterion_sweep,
}


def run_all(workers: int = 4, tmp_dir: str | None = None, only=None):
    """Run the criteria (all, or the named subset); returns result dicts."""
    results = []
    for name, fn in CRITERION_NAMES.items():
        if only is not None and name not in only:
            continue
        if fn is criterion_sweep:
            results.append(fn(tmp_dir=tmp_dir, workers=workers))
        else:
            results.append(fn())
    return results


def nu_report() -> float:
    """The distinguished diagonal velocity, computed by root-finding on the
    normalization constraint."""
    from scipy.optimize import brentq
    return float(brentq(lambda v: flow.three_function_residual(v, v, v),
                        -2.0, -0.1, xtol=1e-14))
