"""Command-line front end: scaling / terms / shoot / profile / report / bench."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .integrator import make_grid
from .reconstruct import final_profile
from .scaling import ProblemParams, build_scaling_map, h_expansion, kappa_alpha
from .shooting import search
from .terms import TermContext, potential_V, term_B, term_D, term_R


def _add_params(ap, s0_default=20.0):
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--A", type=float, default=20.0)
    ap.add_argument("--K", type=float, default=10.0)
    ap.add_argument("--s0", type=float, default=s0_default)


def _params(args) -> ProblemParams:
    return ProblemParams(p=args.p, alpha=args.alpha, n=args.n, A=args.A, K=args.K, s0=args.s0)


def cmd_scaling(args):
    params = _params(args)
    smap = build_scaling_map(params, args.s_max)
    every = max(1, int(round(args.every / smap.ds_table)))
    out = Path(args.out)
    with out.open("w") as fh:
        fh.write("s,ell,h,h_expansion,ratio_to_kappa\n")
        for i in range(0, len(smap.s_grid), every):
            s = smap.s_grid[i]
            fh.write(
                f"{s:.6f},{smap.ell[i]:.12e},{smap.h[i]:.12e},"
                f"{float(h_expansion(s, params)):.12e},"
                f"{float(smap.ratio_to_kappa(s)):.12e}\n"
            )
    if args.json:
        Path(args.json).write_text(smap.to_json())
    print(f"kappa_alpha = {kappa_alpha(params):.12f}")
    print(f"wrote {out} ({len(range(0, len(smap.s_grid), every))} rows)")


def cmd_terms(args):
    params = _params(args)
    s_list = [float(x) for x in args.s_list.split(",")]
    smap = build_scaling_map(params, max(s_list) + 1.0)
    ctx = TermContext(params=params, scaling=smap)
    y = np.arange(0.0, args.y_max + args.dy / 2, args.dy)
    out = Path(args.out)
    with out.open("w") as fh:
        fh.write("y,s,V,R,D_at_q0,B_at_qref\n")
        for s in s_list:
            V = potential_V(y, s, ctx)
            R = term_R(y, s, ctx)
            D = term_D(np.zeros_like(y), y, s, ctx)
            B = term_B(np.full_like(y, args.q_ref), y, s, ctx)
            for i in range(len(y)):
                fh.write(f"{y[i]:.4f},{s:.4f},{V[i]:.10e},{R[i]:.10e},{D[i]:.10e},{B[i]:.10e}\n")
    print(f"wrote {out}")


def cmd_shoot(args):
    params = _params(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    shot, report, history = search(
        params, args.s_target, radial=not args.general,
        dy=args.dy, observe_every=args.observe_every,
    )
    elapsed = time.time() - t0
    with (outdir / "bracket_history.csv").open("w") as fh:
        fh.write("d0,d1,exit_s,violator,sign,anomaly\n")
        for rep in history:
            fh.write(
                f"{rep.d0:.15e},{rep.d1:.15e},"
                f"{'' if rep.exit_s is None else f'{rep.exit_s:.4f}'},"
                f"{rep.violator},{rep.sign:+.0f},{int(rep.anomaly)}\n"
            )
    rec = report.record
    rec.to_csv(outdir / "trajectory.csv")
    (outdir / "checkpoint.json").write_text(rec.final_state.checkpoint_json())
    if rec.snapshots:
        np.savez_compressed(
            outdir / "snapshots.npz",
            s=np.array([s for s, _ in rec.snapshots]),
            w=np.stack([w for _, w in rec.snapshots]),
            y=rec.final_state.y_nodes,
        )
    summary = {
        "d0": shot.d0,
        "d1": shot.d1,
        "survived": report.survived,
        "exit_s": report.exit_s,
        "violator": report.violator,
        "probes": len(history),
        "elapsed_s": elapsed,
        "backend": kernels.backend_name(),
        "params": vars(args),
        "trajectory": rec.summary(),
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, default=str))
    print(json.dumps(summary, indent=2, default=str))


def _load_trajectory(outdir: Path):
    """Rebuild the pieces final_profile needs from a shoot output directory."""
    from .integrator import GridState, TrajectoryRecord

    summary = json.loads((outdir / "summary.json").read_text())
    p = summary["params"]
    params = ProblemParams(p=p["p"], alpha=p["alpha"], n=p["n"], A=p["A"], K=p["K"], s0=p["s0"])
    data = np.load(outdir / "snapshots.npz")
    y = data["y"]
    rec = TrajectoryRecord(params=params, mode=0, dy=float(y[1] - y[0]), observe_every=0.1)
    rec.snapshots = [(float(s), w) for s, w in zip(data["s"], data["w"])]
    rec.s_obs = data["s"]
    rec.residual_sup = [0.0] * len(data["s"])
    rec.final_state = GridState(
        s=float(data["s"][-1]), y_nodes=y, w_values=data["w"][-1],
        dy=float(y[1] - y[0]), y_max=float(np.abs(y).max()), params=params,
    )
    return params, rec


def cmd_profile(args):
    outdir = Path(args.rundir)
    params, rec = _load_trajectory(outdir)
    smap = build_scaling_map(params, rec.s_obs[-1] + 1.0)
    ctx = TermContext(params=params, scaling=smap)
    summary = final_profile(rec, ctx)
    out = outdir / "final_profile.csv"
    with out.open("w") as fh:
        fh.write("x,u_star,formula_ratio,s_read,z_read,skipped\n")
        for s in summary.samples:
            fh.write(
                f"{s.x:.8e},{'' if s.u_star is None else f'{s.u_star:.8e}'},"
                f"{'' if s.formula_ratio is None else f'{s.formula_ratio:.6f}'},"
                f"{'' if s.s_read is None else f'{s.s_read:.4f}'},"
                f"{'' if s.z_read is None else f'{s.z_read:.4f}'},{s.skipped}\n"
            )
    report = {
        "fitted_slope": summary.fitted_slope,
        "expected_slope": summary.expected_slope,
        "n_accepted": len(summary.accepted),
        "dyadic_ratios": [
            {"x": x, "measured": m, "predicted": pr} for x, m, pr in summary.dyadic_ratios
        ],
    }
    (outdir / "final_profile.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))


def cmd_report(args):
    """Small end-to-end pipeline bundling all module outputs into one directory."""
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {"artifacts": [], "backend": kernels.backend_name()}

    def ns(**overrides):
        return argparse.Namespace(**{**vars(args), **overrides})

    cmd_scaling(ns(s_max=args.s_target + 1.0, every=0.5,
                   out=str(outdir / "scaling.csv"), json=None))
    manifest["artifacts"].append("scaling.csv")

    cmd_terms(ns(s_list=f"{args.s0},{args.s_target}", y_max=20.0, dy=0.5,
                 q_ref=0.01, out=str(outdir / "terms.csv")))
    manifest["artifacts"].append("terms.csv")

    cmd_shoot(ns(outdir=str(outdir), general=False))
    manifest["artifacts"] += ["bracket_history.csv", "trajectory.csv",
                              "checkpoint.json", "snapshots.npz", "summary.json"]

    pr = argparse.Namespace(rundir=str(outdir))
    cmd_profile(pr)
    manifest["artifacts"] += ["final_profile.csv", "final_profile.json"]

    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"report bundle in {outdir}")


def cmd_bench(args):
    """Compare the numba and numpy backends: PDE stepping and the rate-ODE sweep."""
    params = ProblemParams(p=3.0, alpha=1.0, n=1, A=20.0, K=float(args.K), s0=20.0)
    smap = build_scaling_map(params, 22.0)
    y = make_grid(params, 22.0, dy=args.dy)
    dy = float((y[-1] - y[0]) / (len(y) - 1))
    w = 1.0 / (1.0 + y * y / 80.0)
    n_steps = args.steps
    results = {}
    for forced, label in ((None, kernels.backend_name()), ("1", "numpy")):
        if forced is None:
            os.environ.pop("BLOWLAB_NUMPY", None)
        else:
            os.environ["BLOWLAB_NUMPY"] = forced
        if label in results:
            continue
        # warmup covers jit compilation
        kernels.advance(w, y, dy, 1, 20.0, 1e-3, 2, 0, params.p, params.alpha,
                        smap.s_min, smap.ds_table, smap.ell, smap.h)
        kernels.ell_backward_sweep(10.0, 20.0, 1e-3, 10, params.p, params.alpha)
        t0 = time.perf_counter()
        kernels.advance(w, y, dy, 1, 20.0, 1e-3, n_steps, 0, params.p, params.alpha,
                        smap.s_min, smap.ds_table, smap.ell, smap.h)
        dt_step = time.perf_counter() - t0
        t0 = time.perf_counter()
        kernels.ell_backward_sweep(10.0, 20.0, 1e-3, 200 * n_steps, params.p, params.alpha)
        dt_sweep = time.perf_counter() - t0
        results[label] = (dt_step, dt_sweep)
        print(f"{label:>6}: {n_steps} RK4 grid steps on {len(y)} nodes in {dt_step:.3f} s "
              f"({1e6 * dt_step / n_steps:.1f} us/step); "
              f"{200 * n_steps} rate-ODE sweep steps in {dt_sweep:.3f} s")
    os.environ.pop("BLOWLAB_NUMPY", None)
    if "numba" in results and "numpy" in results:
        print(f"speedup numba over numpy: stepping "
              f"{results['numpy'][0] / results['numba'][0]:.1f}x, "
              f"rate sweep {results['numpy'][1] / results['numba'][1]:.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(prog="blowlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scaling", help="tabulate ell(s), h(s) and cross-checks to CSV")
    _add_params(sc)
    sc.add_argument("--s-max", dest="s_max", type=float, default=60.0)
    sc.add_argument("--every", type=float, default=0.1)
    sc.add_argument("--out", default="scaling.csv")
    sc.add_argument("--json", default=None, help="also dump the raw map as JSON")
    sc.set_defaults(func=cmd_scaling)

    tm = sub.add_parser("terms", help="sample V, R, D, B on a (y, s) grid to CSV")
    _add_params(tm)
    tm.add_argument("--s-list", dest="s_list", default="20,50,100")
    tm.add_argument("--y-max", dest="y_max", type=float, default=30.0)
    tm.add_argument("--dy", type=float, default=0.25)
    tm.add_argument("--q-ref", dest="q_ref", type=float, default=0.01)
    tm.add_argument("--out", default="terms.csv")
    tm.set_defaults(func=cmd_terms)

    sh = sub.add_parser("shoot", help="bisection search for a surviving trajectory")
    _add_params(sh)
    sh.add_argument("--s-target", dest="s_target", type=float, default=35.0)
    sh.add_argument("--dy", type=float, default=0.05)
    sh.add_argument("--observe-every", dest="observe_every", type=float, default=0.1)
    sh.add_argument("--general", action="store_true", help="search (d0, d1) jointly")
    sh.add_argument("--outdir", default="shoot_run")
    sh.set_defaults(func=cmd_shoot)

    pr = sub.add_parser("profile", help="final-profile diagnostics from a shoot run")
    pr.add_argument("rundir")
    pr.set_defaults(func=cmd_profile)

    rp = sub.add_parser("report", help="bundle scaling/terms/shoot/profile into one directory")
    _add_params(rp)
    rp.add_argument("--s-target", dest="s_target", type=float, default=26.0)
    rp.add_argument("--dy", type=float, default=0.1)
    rp.add_argument("--observe-every", dest="observe_every", type=float, default=0.1)
    rp.add_argument("--outdir", default="report_run")
    rp.set_defaults(func=cmd_report)

    be = sub.add_parser("bench", help="compare numba and numpy backends")
    be.add_argument("--steps", type=int, default=2000)
    be.add_argument("--dy", type=float, default=0.05)
    be.add_argument("--K", type=float, default=10.0)
    be.set_defaults(func=cmd_bench)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
