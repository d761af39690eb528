"""Command-line front end: flow | sweep | verify | classify."""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from . import __version__, acceptance, examples_builtin, flow, matrix_param, sweep
from .errors import HFlowError, NotHalfFlat, NotNormalized
from .flow import AnsatzKind, AnsatzState


def _error(msg: str, code: int):
    print(json.dumps({"error": msg}), file=sys.stderr)
    return code


def _parse_floats(text: str, n=None):
    vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {len(vals)}")
    return vals


def _apply_config(args, argv):
    """Fill options from a key=value config file; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    cp = configparser.ConfigParser()
    with open(args.config, "r", encoding="utf-8") as fh:
        cp.read_file(fh)
    section = args.command if cp.has_section(args.command) else configparser.DEFAULTSECT
    given = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    for key, value in cp.items(section):
        dest = key.replace("-", "_")
        flag = "--" + key.replace("_", "-")
        if not hasattr(args, dest) or flag in given:
            continue
        current = getattr(args, dest)
        if isinstance(current, bool):
            value = value.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(args, dest, value)
    return args


def _out_dir(args) -> str:
    return os.environ.get("HFLOW_OUT", args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hflow",
                                description="Invariant half-flat structures and "
                                            "their metric flow on S3 x S3")
    p.add_argument("--version", action="version", version=f"hflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("flow", help="integrate a single trajectory")
    pf.add_argument("--ansatz", choices=["general", "two", "three", "six", "triaxial"],
                    default="three")
    pf.add_argument("--class", dest="klass", default="0,0",
                    help="cohomology class a,b")
    pf.add_argument("--velocity", default=None, help="initial velocity components")
    pf.add_argument("--base", default=None, help="initial base coordinates")
    pf.add_argument("--t0", type=float, default=0.0)
    pf.add_argument("--t1", type=float, default=-0.97)
    pf.add_argument("--step", type=float, default=1e-3)
    pf.add_argument("--adaptive", action="store_true")
    pf.add_argument("--rtol", type=float, default=1e-9)
    pf.add_argument("--atol", type=float, default=1e-12)
    pf.add_argument("--sample-every", type=int, default=1)
    pf.add_argument("--closed-form", choices=["nk-cone", "bggg", "section4"],
                    default=None)
    pf.add_argument("--param-a", type=float, default=0.0,
                    help="class parameter of the section4 closed form")
    pf.add_argument("--s0", type=float, default=5.0)
    pf.add_argument("--s1", type=float, default=10.0)
    pf.add_argument("--out", default="flow_out")
    pf.add_argument("--workers", type=int, default=1, help=argparse.SUPPRESS)
    pf.add_argument("--config", default=None)

    ps = sub.add_parser("sweep", help="batch sweep over the normalization surface")
    ps.add_argument("--ansatz", choices=["two", "three"], default="three")
    ps.add_argument("--class", dest="klass", default="0,0")
    ps.add_argument("--resolution", type=int, default=10)
    ps.add_argument("--t0", type=float, default=-0.97)
    ps.add_argument("--t1", type=float, default=0.0)
    ps.add_argument("--step", type=float, default=1e-3)
    ps.add_argument("--adaptive", action="store_true")
    ps.add_argument("--sample-every", type=int, default=10)
    ps.add_argument("--workers", type=int, default=1)
    ps.add_argument("--x-min", type=float, default=-1.9)
    ps.add_argument("--x-max", type=float, default=-0.08)
    ps.add_argument("--out", default="sweep_out")
    ps.add_argument("--config", default=None)

    pv = sub.add_parser("verify", help="run the acceptance criteria")
    pv.add_argument("--workers", type=int, default=4)
    pv.add_argument("--criteria", default=None,
                    help="comma-separated criterion names (default: all)")
    pv.add_argument("--json", dest="json_out", default=None,
                    help="also write the report as JSON to this path")
    pv.add_argument("--inject-r-sign-error", action="store_true",
                    help=argparse.SUPPRESS)
    pv.add_argument("--out", default="verify_out", help=argparse.SUPPRESS)
    pv.add_argument("--config", default=None, help=argparse.SUPPRESS)

    pc = sub.add_parser("classify", help="classify the torsion of a pair")
    pc.add_argument("--example", default=None,
                    help="built-in pair: w1w3-positive-scalar (ex2.2), "
                         "w1w3-zero-scalar (ex2.3), nearly-kaehler (nk)")
    pc.add_argument("--json", dest="json_in", default=None,
                    help="path to a JSON object with Q, P, a, b ('-' for stdin)")
    pc.add_argument("--tol", type=float, default=1e-8)
    pc.add_argument("--config", default=None, help=argparse.SUPPRESS)
    return p


# ---------------------------------------------------------------------------
# flow

def _closed_form_trajectory(args):
    """Sample a closed-form solution onto a trajectory-like CSV."""
    from .sweep import trajectory_to_csv

    if args.closed_form == "nk-cone":
        ts = _grid(args.t0, args.t1, args.step * max(1, args.sample_every))
        if any(t == 0.0 for t in ts):
            raise ValueError("the cone solution is singular at t = 0")
        coords = []
        for t in ts:
            st = flow.closed_nk_cone(t)
            q = st.Q[1, 1]
            p = st.P[1, 1]
            coords.append([q, q, q, p, p, p])
        kind, a, b = AnsatzKind.THREE, 0.0, 0.0
        times = ts
    elif args.closed_form == "section4":
        ss = _grid(args.s0, args.s1, (args.s1 - args.s0) / 200.0)
        a = args.param_a
        coords, times, t_acc = [], [], 0.0
        prev_s = None
        for s in ss:
            x, al, dtds = flow.closed_section4(s, a)
            if prev_s is not None:
                t_acc += 0.5 * (dtds + prev_dtds) * (s - prev_s)
            coords.append([x, x, x, -1.5 * al * x, -1.5 * al * x, -1.5 * al * x])
            times.append(t_acc)
            prev_s, prev_dtds = s, dtds
        kind, b = AnsatzKind.SIX, -a
    else:  # bggg
        ss = _grid(args.s0, args.s1, (args.s1 - args.s0) / 200.0)
        coords, times, t_acc = [], [], 0.0
        prev_s = None
        for s in ss:
            f = flow.closed_abc(s)
            if prev_s is not None:
                t_acc += 0.5 * (f["dt_ds"] + prev_dtds) * (s - prev_s)
            coords.append([f["a"], f["b"], f["a"], f["b"], f["a3"], f["b3"]])
            times.append(t_acc)
            prev_s, prev_dtds = s, f["dt_ds"]
        q, p, cls = flow.triaxial_to_sixfn(coords[0][0::2], coords[0][1::2])
        kind, a, b = AnsatzKind.TRIAXIAL, float(cls), -float(cls)
        # the class varies along s for this family; recorded per sample below
        a = b = 0.0
    # assemble via the trajectory container for uniform diagnostics
    from .flow import Trajectory, _safe_rhs, _state_invariants, _metric_from_coords
    from . import curvature as cv
    n = len(times)
    lam = np.empty(n)
    H = np.empty(n)
    comm = np.zeros(n)
    mine = np.empty(n)
    scal = np.full(n, np.nan)
    for i, c in enumerate(coords):
        if kind is AnsatzKind.TRIAXIAL:
            qq, pp, cls = flow.triaxial_to_sixfn(np.asarray(c)[0::2], np.asarray(c)[1::2])
            ai, bi = float(cls), -float(cls)
        else:
            ai, bi = a, b
        lam[i], H[i], _, mine[i], comm[i] = _state_invariants(
            kind, np.asarray(c, dtype=float), ai, bi)
        scal[i] = cv.ricci_scalar(_metric_from_coords(kind, np.asarray(c), ai, bi))
    traj = Trajectory(kind=kind, a=a, b=b, times=np.asarray(times),
                      coords=np.asarray(coords), derivs=np.zeros((n, len(coords[0]))),
                      lam=lam, sqrt_neg_lam=np.sqrt(np.maximum(-lam, 0.0)),
                      hamiltonian=H, comm_norm=comm, min_metric_eig=mine,
                      scalar_curv=scal, termination="Completed",
                      t_final=float(times[-1]))
    return traj


def _grid(a, b, h):
    n = max(1, round(abs(b - a) / max(abs(h), 1e-12)))
    return [a + (b - a) * i / n for i in range(n + 1)]


def cmd_flow(args) -> int:
    out = _out_dir(args)
    try:
        a_cls, b_cls = _parse_floats(args.klass, 2)
        if args.closed_form:
            traj = _closed_form_trajectory(args)
        else:
            if args.velocity is None:
                raise ValueError("--velocity is required without --closed-form")
            vel = _parse_floats(args.velocity)
            kind = AnsatzKind(args.ansatz)
            if kind is AnsatzKind.THREE:
                state = flow.init_three_function(*vel)
            elif kind is AnsatzKind.TWO:
                state = flow.init_two_function(*vel)
            elif kind is AnsatzKind.SIX:
                base = _parse_floats(args.base, 3) if args.base else [1.0, 1.0, 1.0]
                state = AnsatzState(kind, np.array(base + vel), a_cls, b_cls,
                                    args.t0)
            elif kind is AnsatzKind.TRIAXIAL:
                state = AnsatzState(kind, np.array(vel))
            else:
                raise ValueError("general flows start from --json-state (see docs)")
            if state.t != args.t0:
                state = AnsatzState(state.kind, state.coords, state.a, state.b,
                                    args.t0)
            traj = flow.integrate(state, args.t1, step=args.step,
                                  adaptive=args.adaptive, rtol=args.rtol,
                                  atol=args.atol, sample_every=args.sample_every)
    except (NotNormalized, NotHalfFlat, ValueError) as exc:
        return _error(f"{type(exc).__name__}: {exc}", 2)
    except HFlowError as exc:
        return _error(f"{type(exc).__name__}: {exc}", 1)
    if traj.n_samples <= 1 and traj.termination != "Completed":
        _write_flow_output(out, traj)
        return _error(f"immediate termination: {traj.termination}", 1)
    _write_flow_output(out, traj)
    print(json.dumps({"out": out, "termination": traj.termination,
                      "t_final": traj.t_final, "samples": traj.n_samples}))
    return 0


def _write_flow_output(out, traj):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "traj_00000.csv"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write(sweep.trajectory_to_csv(traj))
    manifest = {
        "tool": "hflow", "version": __version__,
        "trajectories": [{
            "index": 0, "csv": "traj_00000.csv", "ansatz": traj.kind.value,
            "class": [traj.a, traj.b], "termination": traj.termination,
            "t_final": traj.t_final, "n_samples": traj.n_samples,
            "velocity": [float(v) for v in traj.derivs[0][:len(traj.coords[0]) // 2]]
            if traj.derivs.size else [],
        }],
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    try:
        a_cls, b_cls = _parse_floats(args.klass, 2)
        cfg = sweep.SweepConfig(
            ansatz=args.ansatz, a=a_cls, b=b_cls, resolution=args.resolution,
            t0=args.t0, t1=args.t1, step=args.step, adaptive=args.adaptive,
            sample_every=args.sample_every, workers=args.workers,
            out_dir=_out_dir(args), x_min=args.x_min, x_max=args.x_max)
        cfg.validate()
    except ValueError as exc:
        return _error(str(exc), 2)
    manifest = sweep.run_sweep(cfg)
    n_done = sum(1 for r in manifest["trajectories"]
                 if r.get("termination_neg") == "Completed"
                 or r.get("termination_pos") == "Completed"
                 or r.get("t_final_neg") is not None
                 or r.get("t_final_pos") is not None)
    print(json.dumps({"out": cfg.out_dir,
                      "n_trajectories": manifest["n_trajectories"],
                      "wallclock_s": round(manifest["wallclock_s"], 2)}))
    return 0 if n_done >= 1 else 1


def cmd_verify(args) -> int:
    if args.inject_r_sign_error:
        matrix_param._R_SIGN = -1.0
    selected = None
    if args.criteria:
        selected = {name.strip() for name in args.criteria.split(",") if name.strip()}
    results = acceptance.run_all(workers=args.workers, only=selected)
    nu = acceptance.nu_report()
    all_ok = all(r["passed"] for r in results)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['details']}")
    print(f"INFO nu = {nu:.6f} (distinguished diagonal velocity)")
    report = {"results": results, "nu": nu, "all_passed": all_ok,
              "version": __version__}
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    print(json.dumps({"all_passed": all_ok,
                      "failed": [r["name"] for r in results if not r["passed"]]}))
    return 0 if all_ok else 1


def cmd_classify(args) -> int:
    try:
        if args.example:
            pair = examples_builtin.builtin_pair(args.example)
        elif args.json_in:
            raw = sys.stdin.read() if args.json_in == "-" else \
                open(args.json_in, "r", encoding="utf-8").read()
            obj = json.loads(raw)
            pair = matrix_param.HalfFlatPair(
                np.asarray(obj["Q"], dtype=float), np.asarray(obj["P"], dtype=float),
                float(obj.get("a", 0.0)), float(obj.get("b", 0.0)))
            pair.validate(tol=max(args.tol, 1e-9))
        else:
            raise ValueError("need --example or --json")
    except (KeyError, ValueError, NotHalfFlat, json.JSONDecodeError) as exc:
        return _error(f"{type(exc).__name__}: {exc}", 2)
    cls = matrix_param.classify_torsion(pair, tol=args.tol)
    scalar_note = None
    if cls.kind == "W1W3":
        from . import curvature, forms6
        omega, gamma = matrix_param.forms_from_pair(pair)
        s = curvature.ricci_scalar(forms6.su3_metric(omega, gamma))
        scalar_note = s
    out = {"kind": cls.kind, "alpha": cls.alpha, "residuals": cls.residuals,
           "hamiltonian": pair.hamiltonian()}
    if scalar_note is not None:
        out["scalar_curvature"] = scalar_note
    print(json.dumps(out, indent=1))
    return 0


_NUMERIC_FLAGS = ("--velocity", "--base", "--class", "--t0", "--t1",
                  "--x-min", "--x-max", "--param-a", "--s0", "--s1")


def _join_negative_values(argv):
    """Merge `--flag -1,-2` into `--flag=-1,-2` so argparse accepts it."""
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok in _NUMERIC_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and any(ch.isdigit() for ch in argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    argv = _join_negative_values(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        args = _apply_config(args, argv)
    handler = {"flow": cmd_flow, "sweep": cmd_sweep, "verify": cmd_verify,
               "classify": cmd_classify}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
