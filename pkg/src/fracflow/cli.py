"""Command-line entry point: ``fracflow <verb> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, load_config
from .functionals import ball_integrals, measure
from .harnack import THEOREMS, run_verifier
from .stepper import StepFailure, simulate
from .storage import load_trajectory, save_trajectory

log = logging.getLogger("fracflow")


def _emit(obj, out=None):
    text = json.dumps(obj, indent=1, sort_keys=True, default=str)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def cmd_run(args) -> int:
    spec = load_config(args.config)
    if args.print_config:
        print(dump_config(spec), end="")
        return 0
    out = Path(args.out or Path(args.config).with_suffix("").name + "_run")
    t0 = time.perf_counter()
    try:
        traj = simulate(spec)
    except StepFailure as exc:
        if exc.trajectory is not None:
            save_trajectory(exc.trajectory, out, spec, {"wall_seconds": time.perf_counter() - t0},
                            extra={"failure": str(exc)})
        print(f"error: {exc} (last good state saved to {out})", file=sys.stderr)
        return 2
    timing = {"wall_seconds": time.perf_counter() - t0, "steps": len(traj.dt_history)}
    save_trajectory(traj, out, spec, timing)
    print(json.dumps({"run": str(out), "extinction_time": traj.extinction_time,
                      "snapshots": len(traj.snapshots), "steps": len(traj.dt_history)}))
    return 0


def cmd_verify(args) -> int:
    traj = load_trajectory(args.run)
    kw = {k: getattr(args, k) for k in ("T_star", "t_lo", "t_hi", "rho1", "rho2", "t1", "t2", "k")
          if getattr(args, k) is not None}
    kw["sign"] = args.sign
    kw["absolute"] = args.absolute
    rep = run_verifier(traj, args.theorem, args.x0, args.rho, args.t, args.r, **kw)
    d = rep.as_dict()
    _emit(d, args.out)
    if args.strict and d.get("regime_check") == "fail":
        return 1
    return 0


def cmd_measure(args) -> int:
    traj = load_trajectory(args.run)
    m = measure(traj, args.name, args.x0, args.rho, args.t1, args.t2, args.r, args.sign)
    _emit(m.as_dict(), args.out)
    return 0


def cmd_sweep(args) -> int:
    from .sweep import load_sweep, run_sweep
    sweep = load_sweep(args.config)
    out = args.out or sweep.get("output") or Path(args.config).with_suffix("").name + "_sweep"
    rows, summary = run_sweep(sweep, out, jobs=args.jobs)
    _emit({"rows": len(rows), "output": str(out), "summary": summary})
    return 0


def cmd_oracle(args) -> int:
    from . import oracles as orc
    if args.sub == "ode":
        traj = load_trajectory(args.run)
        _emit(orc.check_ode_comparison(traj, args.q).as_dict(), args.out)
    elif args.sub == "mollify":
        traj = load_trajectory(args.run)
        params = orc.MollifierParams(args.h, args.direction)
        res = orc.mollifier_identity_residual(traj.times, traj.values, params)
        if args.save:
            save_trajectory(orc.mollify(traj, params), args.save, traj.problem)
        _emit({"h": args.h, "direction": args.direction, "identity_residual": res,
               "snapshots": len(traj.snapshots)}, args.out)
    elif args.sub == "lemmas":
        _emit(lemma_reports(args.count, args.seed), args.out)
    elif args.sub == "inequalities":
        _emit(orc.algebraic_inequality_suite(args.p, args.q, args.samples, args.seed).as_dict(), args.out)
    elif args.sub == "scale":
        traj = load_trajectory(args.run)
        scaled = orc.scaled_trajectory(traj, args.k)
        save_trajectory(scaled, args.save, None)
        _emit({"k": args.k, "time_factor": args.k ** (2 - traj.p), "saved": args.save}, args.out)
    return 0


def lemma_reports(count: int = 100, seed: int = 0) -> dict:
    """Randomized checks of the fast-convergence and interpolation lemmas."""
    from .oracles import check_fast_convergence, check_interpolation, interpolation_sequence
    rng = np.random.default_rng(seed)
    fc_fail = 0
    for _ in range(count):
        C, b, eta = 1 + rng.uniform(0.01, 9), 1 + rng.uniform(0.01, 9), rng.uniform(0.1, 3)
        thr = C ** (-1 / eta) * b ** (-1 / eta ** 2)
        rep = check_fast_convergence(C, b, eta, thr * rng.uniform(0.0, 1.0))
        fc_fail += not (rep.hypothesis_met and rep.converged)
    it_fail, slack_min = 0, math.inf
    for _ in range(count):
        C, b, eta = rng.uniform(0.1, 10), 1 + rng.uniform(0.01, 4), rng.uniform(0.05, 0.95)
        seq = interpolation_sequence(C, b, eta, -rng.uniform(0.01, 5))
        rep = check_interpolation(C, b, eta, seq)
        it_fail += not (rep.applicable and rep.holds)
        if rep.slack is not None:
            slack_min = min(slack_min, rep.slack / 2 ** (1 / eta))
    return {"fast_convergence": {"cases": count, "failures": fc_fail},
            "interpolation": {"cases": count, "failures": it_fail,
                              "min_slack_over_2_pow_inv_eta": slack_min}}


def cmd_check_operator(args) -> int:
    from .operator import convergence_study
    cs = convergence_study(args.p, args.s, args.M, args.a, args.b, args.x)
    _emit(cs.as_dict(), args.out)
    return 0


def cmd_export_plots(args) -> int:
    traj = load_trajectory(args.run)
    out = Path(args.out or Path(args.run) / "plots")
    out.mkdir(parents=True, exist_ok=True)
    times = traj.times
    sups = traj.sup_abs
    mass = ball_integrals(traj, args.x0, args.rho, 1.0, "plus")
    with open(out / "sup_vs_t.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sup_u"])
        w.writerows([[repr(float(t)), repr(float(s))] for t, s in zip(times, sups)])
    with open(out / "mass_vs_t.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ball_mass"])
        w.writerows([[repr(float(t)), repr(float(m))] for t, m in zip(times, mass)])
    with open(out / "profiles.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for snap in traj.snapshots:
            for x, v in zip(traj.domain.centers, snap.values):
                w.writerow([repr(float(snap.time)), repr(float(x)), repr(float(v))])
    notes = []
    T = traj.extinction_time
    if T is not None and T > 0:
        keep = (times < T) & (mass > 0)
        with open(out / "loglog_mass.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["log_T_minus_t", "log_mass"])
            w.writerows([[repr(float(np.log(T - t))), repr(float(np.log(m)))]
                         for t, m in zip(times[keep], mass[keep])])
    else:
        notes.append("no extinction detected: log-log decay series omitted")
    _emit({"output": str(out), "notes": notes})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracflow", description="Singular fractional p-Laplacian "
                                 "diffusion simulator and estimate verification harness.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="simulate a configured problem")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--print-config", action="store_true", help="echo the fully resolved spec and exit")
    p.set_defaults(fn=cmd_run)

    def window(p, t_default=None):
        p.add_argument("--run", required=True)
        p.add_argument("--x0", type=float, default=0.0)
        p.add_argument("--rho", type=float, default=0.2)
        p.add_argument("--r", type=float, default=1.0)
        p.add_argument("--sign", default="plus", choices=["plus", "minus", "abs"])
        p.add_argument("--out")

    p = sub.add_parser("verify", help="evaluate one estimate on a stored run")
    window(p)
    p.add_argument("--theorem", required=True, choices=THEOREMS)
    p.add_argument("--t", type=float)
    for name in ("T-star", "t-lo", "t-hi", "rho1", "rho2", "t1", "t2", "k"):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float)
    p.add_argument("--absolute", action="store_true", help="use the |u| form of the L^r estimate")
    p.add_argument("--strict", action="store_true", help="exit 1 when the regime check fails")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("measure", help="evaluate a functional on a stored run")
    window(p)
    p.add_argument("--name", required=True,
                   choices=["tail", "mass_sup", "mass_inf", "sup_cylinder", "exponents", "perturbation"])
    p.add_argument("--t1", type=float, default=0.0)
    p.add_argument("--t2", type=float)
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("sweep", help="run a family of problems and tabulate implied constants")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("oracle", help="independent reference checks")
    osub = p.add_subparsers(dest="sub", required=True)
    o = osub.add_parser("ode")
    o.add_argument("--run", required=True)
    o.add_argument("--q", type=float)
    o.add_argument("--out")
    o = osub.add_parser("mollify")
    o.add_argument("--run", required=True)
    o.add_argument("--h", type=float, required=True)
    o.add_argument("--direction", default="forward", choices=["forward", "backward"])
    o.add_argument("--save")
    o.add_argument("--out")
    o = osub.add_parser("lemmas")
    o.add_argument("--count", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o = osub.add_parser("inequalities")
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--q", type=float, required=True)
    o.add_argument("--samples", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o = osub.add_parser("scale")
    o.add_argument("--run", required=True)
    o.add_argument("--k", type=float, required=True)
    o.add_argument("--save", required=True)
    o.add_argument("--out")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("check-operator", help="compare the discrete operator with adaptive quadrature")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--M", type=int, nargs="+", default=[128, 256, 512])
    p.add_argument("--a", type=float, default=-8.0)
    p.add_argument("--b", type=float, default=8.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_check_operator)

    p = sub.add_parser("export-plots", help="write plot-ready CSV series for a run")
    p.add_argument("--run", required=True)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_export_plots)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
