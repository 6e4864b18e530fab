"""Run directories: ``manifest.json``, ``timing.json`` and one CSV per snapshot.

The manifest holds only deterministic content (no wall-clock data), so
identical configurations produce byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__
from .config import ProblemSpec, problem_from_dict
from .grid import GridFunction
from .stepper import Trajectory

FORMAT = "fracflow-run/1"


def _snapshot_name(i: int) -> str:
    return f"snap_{i:05d}.csv"


def save_trajectory(traj: Trajectory, directory, problem: ProblemSpec | None = None,
                    timing: dict | None = None, extra: dict | None = None) -> Path:
    d = Path(directory)
    (d / "snapshots").mkdir(parents=True, exist_ok=True)
    problem = problem or traj.problem
    digest = hashlib.sha256()
    index = []
    for i, snap in enumerate(traj.snapshots):
        rel = f"snapshots/{_snapshot_name(i)}"
        snap.to_csv(d / rel)
        digest.update((d / rel).read_bytes())
        index.append({"index": i, "time": float(snap.time), "file": rel})
    digest.update(json.dumps(list(traj.dt_history)).encode())
    manifest = {
        "format": FORMAT,
        "version": __version__,
        "spec_hash": problem.spec_hash() if problem is not None else None,
        "problem": problem.as_dict() if problem is not None else None,
        "kernel": traj.kernel.as_dict() if traj.kernel is not None else None,
        "exterior": traj.exterior.as_dict(),
        "domain": {"a": traj.domain.a, "b": traj.domain.b, "M": traj.domain.M, "N": traj.domain.N},
        "extinction_time": traj.extinction_time,
        "dt_history": list(traj.dt_history),
        "meta": {k: v for k, v in traj.meta.items() if isinstance(v, (int, float, str, bool, type(None)))},
        "snapshots": index,
        "output_hash": digest.hexdigest(),
    }
    if extra:
        manifest["extra"] = extra
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    if timing is not None:
        (d / "timing.json").write_text(json.dumps(timing, indent=1, sort_keys=True) + "\n")
    return d


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no run found at {directory} (missing manifest.json)")
    m = json.loads(path.read_text())
    if m.get("format") != FORMAT:
        raise ValueError(f"{path}: unsupported run format {m.get('format')!r}")
    return m


def load_trajectory(directory) -> Trajectory:
    from .grid import Domain
    from .kernel import ExteriorProfile, KernelSpec, Multiplier

    d = Path(directory)
    m = load_manifest(d)
    problem = problem_from_dict(m["problem"]) if m.get("problem") else None
    if problem is not None:
        dom, kern, ext = problem.domain, problem.kernel, problem.exterior
    else:
        dom = Domain(**m["domain"])
        kd = dict(m["kernel"])
        kern = KernelSpec(multiplier=Multiplier(**kd.pop("multiplier")), **kd)
        ed = dict(m["exterior"])
        if "samples" in ed:
            ed["samples"] = tuple(map(tuple, ed["samples"]))
        ext = ExteriorProfile(**ed)
    snaps = tuple(GridFunction.from_csv(d / s["file"], dom, s["time"]) for s in m["snapshots"])
    return Trajectory(snaps, tuple(m["dt_history"]), m["extinction_time"], kern, ext, problem,
                      dict(m.get("meta", {})))
