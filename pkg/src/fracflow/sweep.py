"""Parameter sweeps: run a family of problems and tabulate implied constants."""

from __future__ import annotations

import copy
import csv
import itertools
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .config import ConfigError, problem_from_dict
from .harnack import run_verifier
from .stepper import StepFailure, simulate

AXES = ("initial", "k", "multiplier", "M", "p", "s")
SCALED_TIME_KEYS = ("t", "t_lo", "t_hi", "T_star", "t1", "t2")


def _expand(sweep: dict) -> list[dict]:
    axes = sweep.get("axes", {})
    unknown = set(axes) - set(AXES)
    if unknown:
        raise ConfigError("axes", f"unknown sweep axes {sorted(unknown)} (allowed: {', '.join(AXES)})")
    names = [a for a in AXES if a in axes]
    combos = itertools.product(*[list(enumerate(axes[a])) for a in names])
    out = []
    for combo in combos:
        out.append({n: v for n, (_, v) in zip(names, combo)} | {"_index": {n: i for n, (i, _) in zip(names, combo)}})
    return out or [{"_index": {}}]


def _point_problem(base: dict, point: dict):
    cfg = copy.deepcopy(base)
    if "initial" in point:
        cfg["initial"] = dict(point["initial"])
    if "multiplier" in point:
        cfg.setdefault("kernel", {})["multiplier"] = dict(point["multiplier"])
    for key in ("p", "s"):
        if key in point:
            cfg.setdefault("kernel", {})[key] = point[key]
    if "M" in point:
        cfg.setdefault("domain", {})["M"] = point["M"]
    problem = problem_from_dict(cfg)
    k = float(point.get("k", 1.0))
    return (problem.scaled(k) if k != 1.0 else problem), k


def _run_point(args):
    base, point, verifiers, scale_windows = args
    rows = []
    label = {a: point[a] for a in AXES if a in point}
    try:
        problem, k = _point_problem(base, point)
        traj = simulate(problem)
    except (StepFailure, ValueError) as exc:
        return [{"point": label, "theorem": v.get("theorem"), "error": str(exc)} for v in verifiers]
    f = k ** (2.0 - problem.kernel.p)
    for v in verifiers:
        kw = dict(v)
        theorem = kw.pop("theorem")
        if scale_windows:
            for key in SCALED_TIME_KEYS:
                if key in kw and kw[key] is not None:
                    kw[key] = kw[key] * f
        row = {"point": label, "theorem": theorem, "T_num": traj.extinction_time}
        try:
            rep = run_verifier(traj, theorem, **kw)
            d = rep.as_dict()
            row.update({key: d.get(key) for key in ("gamma_obs", "lhs", "rhs_unit_gamma", "regime_check",
                                                     "regime_reason", "slope_mass", "slope_sup", "r2_mass",
                                                     "expected_slope")})
            if theorem == "extinction":
                row["gamma_obs"] = d["extras"].get("gamma_star_obs")
        except (ValueError, AssertionError) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return rows


def _value(row):
    g = row.get("gamma_obs")
    if g is None:
        g = row.get("slope_mass")
    return g if isinstance(g, (int, float)) and math.isfinite(g) else None


def summarize(rows: list[dict]) -> dict:
    summary: dict = {}
    for th in sorted({r["theorem"] for r in rows}):
        vals = [_value(r) for r in rows if r["theorem"] == th]
        vals = [v for v in vals if v is not None]
        entry = {"count": len(vals), "errors": sum(1 for r in rows if r["theorem"] == th and "error" in r)}
        if vals:
            entry.update(max=max(vals), min=min(vals), median=statistics.median(vals),
                         max_over_min=(max(vals) / min(vals)) if min(vals) > 0 else None)
        # scaling invariance: compare members that differ only in k
        groups: dict = {}
        for r in rows:
            if r["theorem"] != th or _value(r) is None:
                continue
            key = json.dumps({a: r["point"][a] for a in r["point"] if a != "k"}, sort_keys=True)
            groups.setdefault(key, []).append(_value(r))
        devs = [max(abs(v / g[0] - 1.0) for v in g) for g in groups.values() if len(g) > 1 and g[0] != 0]
        entry["scale_invariance_max_dev"] = max(devs) if devs else None
        summary[th] = entry
    return summary


def run_sweep(sweep: dict, out_dir=None, jobs: int = 1) -> tuple[list[dict], dict]:
    if "base" not in sweep:
        raise ConfigError("base", "sweep needs a base problem mapping")
    verifiers = sweep.get("verifiers", [])
    if not verifiers:
        raise ConfigError("verifiers", "sweep needs at least one verifier entry")
    scale_windows = bool(sweep.get("scale_windows", True))
    points = _expand(sweep)
    tasks = [(sweep["base"], p, verifiers, scale_windows) for p in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]
    rows = [r for rs in results for r in rs]
    summary = summarize(rows)
    axes = sweep.get("axes", {})
    if "M" in axes and len(axes["M"]) >= 2:
        from .operator import convergence_study
        kern = sweep["base"].get("kernel", {})
        cs = convergence_study(kern.get("p", 1.5), kern.get("s", 0.5), axes["M"])
        summary["operator_convergence"] = {"Ms": cs.Ms, "rel_errors": cs.rel_errors, "order": cs.order}
    if out_dir is not None:
        write_outputs(rows, summary, out_dir)
    return rows, summary


def write_outputs(rows, summary, out_dir):
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    fields = ["point", "theorem", "gamma_obs", "lhs", "rhs_unit_gamma", "regime_check", "slope_mass",
              "slope_sup", "r2_mass", "expected_slope", "T_num", "regime_reason", "error"]
    with open(d / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "point": json.dumps(r["point"], sort_keys=True)})
    (d / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=str) + "\n")


def load_sweep(path) -> dict:
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError("<document>", "sweep file must be a mapping", 1, str(path))
    return data
