"""Experiment description (``ProblemSpec``) and its YAML configuration format."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .grid import BallWindow, Domain, GridFunction
from .kernel import ExteriorProfile, KernelSpec, Multiplier, check_exterior_admissible
from .stepper import NewtonParams, SteppingPolicy


class ConfigError(ValueError):
    """Schema violation, reported with the offending field path and source line."""

    def __init__(self, field_path: str, message: str, line: int | None = None, source: str = ""):
        loc = f"{source}:{line}: " if line is not None and source else (f"line {line}: " if line else "")
        super().__init__(f"{loc}{field_path}: {message}")
        self.field_path = field_path
        self.line = line


@dataclass(frozen=True)
class InitialDatum:
    """Named initial-datum families; ``amplitude`` multiplies every family."""

    kind: str = "bump"
    center: float = 0.0
    width: float = 0.5
    height: float = 1.0
    centers: tuple = (-0.4, 0.4)
    heights: tuple = (1.0, 0.5)
    ramp: float = 0.1
    path: str = ""
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bump", "plateau", "two_bumps", "zero", "file"):
            raise ValueError(f"unknown initial datum kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError("width must be > 0")
        if self.kind == "plateau" and not self.ramp > 0:
            raise ValueError("ramp must be > 0")
        if self.kind == "two_bumps" and len(self.centers) != len(self.heights):
            raise ValueError("centers and heights must have equal length")
        if self.kind == "file" and not self.path:
            raise ValueError("file datum needs a path")
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        object.__setattr__(self, "heights", tuple(float(h) for h in self.heights))

    @staticmethod
    def _bump(x, c, w):
        r = (x - c) / w
        return np.where(np.abs(r) < 1, (1 - r * r) ** 2, 0.0)

    def values(self, domain: Domain) -> np.ndarray:
        x = domain.centers
        if self.kind == "zero":
            v = np.zeros(domain.M)
        elif self.kind == "bump":
            v = self.height * self._bump(x, self.center, self.width)
        elif self.kind == "two_bumps":
            v = sum(h * self._bump(x, c, self.width) for c, h in zip(self.centers, self.heights))
        elif self.kind == "plateau":
            d = np.abs(x - self.center) - self.width
            edge = np.clip(d / self.ramp, 0.0, 1.0)
            v = self.height * np.where(d <= 0, 1.0, (1 - edge * edge) ** 2)
        else:
            v = GridFunction.from_csv(self.path, domain).values
        return self.amplitude * np.asarray(v, dtype=float)

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "amplitude": self.amplitude}
        if self.kind in ("bump", "plateau"):
            d.update(center=self.center, width=self.width, height=self.height)
        if self.kind == "plateau":
            d["ramp"] = self.ramp
        if self.kind == "two_bumps":
            d.update(centers=list(self.centers), heights=list(self.heights), width=self.width)
        if self.kind == "file":
            d["path"] = self.path
        return d


@dataclass(frozen=True)
class ProblemSpec:
    domain: Domain
    kernel: KernelSpec
    exterior: ExteriorProfile = field(default_factory=ExteriorProfile)
    u0: InitialDatum = field(default_factory=InitialDatum)
    T: float = 1.0
    stepping: SteppingPolicy = field(default_factory=SteppingPolicy)
    nonnegative: bool = True
    nonnegativity_box: BallWindow | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be finite and > 0, got {self.T}")
        self.domain.require_1d()
        lo, hi = self.kernel.multiplier.bounds()
        if lo < self.kernel.C1 or hi > self.kernel.C2:
            raise ValueError(f"multiplier range [{lo}, {hi}] is not inside [C1, C2] = "
                             f"[{self.kernel.C1}, {self.kernel.C2}]")
        check_exterior_admissible(self.exterior, self.domain, self.kernel)

    def initial_values(self) -> np.ndarray:
        return self.u0.values(self.domain)

    def initial(self) -> GridFunction:
        return GridFunction(self.domain, self.initial_values(), 0.0)

    def scaled(self, k: float) -> "ProblemSpec":
        """Problem for data ``k u0``; horizon and step sizes follow ``k^(2-p)``."""
        from .oracles import scale_profile
        f = k ** (2.0 - self.kernel.p)
        return replace(self, u0=replace(self.u0, amplitude=self.u0.amplitude * k),
                       exterior=scale_profile(self.exterior, k), T=self.T * f,
                       stepping=self.stepping.scaled_time(f))

    def as_dict(self) -> dict:
        st = dataclasses.asdict(self.stepping)
        st["newton"]["eps_schedule"] = list(st["newton"]["eps_schedule"])
        if math.isinf(st["dt_max"]):
            st["dt_max"] = "inf"
        d = {
            "domain": {"a": self.domain.a, "b": self.domain.b, "M": self.domain.M, "N": self.domain.N},
            "kernel": self.kernel.as_dict(),
            "exterior": self.exterior.as_dict(),
            "initial": self.u0.as_dict(),
            "T": self.T,
            "stepping": st,
            "nonnegative": self.nonnegative,
            "seed": self.seed,
        }
        if self.nonnegativity_box is not None:
            d["nonnegativity_box"] = self.nonnegativity_box.as_dict()
        return d

    def spec_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# schema


_SCHEMA: dict[str, Any] = {
    "domain": {"a": float, "b": float, "M": int, "N": int},
    "kernel": {"p": float, "s": float, "C1": float, "C2": float,
               "multiplier": {"kind": str, "c": float, "c1": float, "c2": float,
                              "period": float, "frequency": float}},
    "exterior": {"kind": str, "c": float, "beta": float, "samples": list},
    "initial": {"kind": str, "center": float, "width": float, "height": float, "centers": list,
                "heights": list, "ramp": float, "path": str, "amplitude": float},
    "T": float,
    "stepping": {"mode": str, "dt_init": float, "dt_min": float, "dt_max": float, "safety": float,
                 "growth": float, "max_rel_change": float, "snapshot_every": int,
                 "dense_threshold": float, "extinction_tol": float,
                 "newton": {"max_iter": int, "grad_tol": float, "stage_tol": float, "eps_schedule": list,
                            "armijo": float, "easy_iterations": int}},
    "nonnegative": bool,
    "nonnegativity_box": {"x0": float, "rho": float, "t1": float, "t2": float},
    "seed": int,
}

_REQUIRED = {"domain": ("a", "b", "M"), "kernel": ("p", "s")}


def _line_map(text: str) -> dict[str, int]:
    """Map dotted key paths to 1-based source lines."""
    out: dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[path] = k.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return out


def _coerce(value, kind, path, lines, source):
    def err(msg):
        raise ConfigError(path, msg, lines.get(path), source)

    if kind is float:
        if isinstance(value, bool):
            err(f"expected a number, got {value!r}")
        if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf"):
            return math.inf
        try:
            v = float(value)
        except (TypeError, ValueError):
            err(f"expected a number, got {value!r}")
        return v
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            err(f"expected an integer, got {value!r}")
        return int(value)
    if kind is bool:
        if not isinstance(value, bool):
            err(f"expected true/false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            err(f"expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            err(f"expected a list, got {value!r}")
        return value
    if isinstance(kind, dict):
        if not isinstance(value, dict):
            err(f"expected a mapping, got {value!r}")
        out = {}
        for k, v in value.items():
            sub = f"{path}.{k}" if path else str(k)
            if k not in kind:
                raise ConfigError(sub, f"unknown key (allowed: {', '.join(kind)})", lines.get(sub), source)
            out[k] = _coerce(v, kind[k], sub, lines, source)
        return out
    raise TypeError(kind)


def _build(section: str, fn, lines, source, root_line=None):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(section, str(exc), lines.get(section, root_line), source) from None


def problem_from_dict(data: dict, lines: dict | None = None, source: str = "") -> ProblemSpec:
    lines = lines or {}
    data = _coerce(data or {}, _SCHEMA, "", lines, source)
    for sec, keys in _REQUIRED.items():
        if sec not in data:
            raise ConfigError(sec, "required section missing", None, source)
        for k in keys:
            if k not in data[sec]:
                raise ConfigError(f"{sec}.{k}", "required key missing", lines.get(sec), source)
    dom = _build("domain", lambda: Domain(**data["domain"]), lines, source)
    kd = dict(data["kernel"])
    mult = _build("kernel.multiplier", lambda: Multiplier(**kd.pop("multiplier", {})), lines, source)
    kern = _build("kernel", lambda: KernelSpec(multiplier=mult, **kd), lines, source)
    ext = _build("exterior", lambda: ExteriorProfile(**{
        k: (tuple(map(tuple, v)) if k == "samples" else v)
        for k, v in data.get("exterior", {}).items()}), lines, source)
    ini = dict(data.get("initial", {}))
    for k in ("centers", "heights"):
        if k in ini:
            ini[k] = tuple(ini[k])
    if ini.get("kind") == "file" and source and ini.get("path") and not Path(ini["path"]).is_absolute():
        ini["path"] = str(Path(source).parent / ini["path"])
    u0 = _build("initial", lambda: InitialDatum(**ini), lines, source)
    st = dict(data.get("stepping", {}))
    nw = dict(st.pop("newton", {}))
    if "eps_schedule" in nw:
        nw["eps_schedule"] = tuple(nw["eps_schedule"])
    newton = _build("stepping.newton", lambda: NewtonParams(**nw), lines, source)
    pol = _build("stepping", lambda: SteppingPolicy(newton=newton, **st), lines, source)
    box = None
    if "nonnegativity_box" in data:
        box = _build("nonnegativity_box", lambda: BallWindow(**data["nonnegativity_box"]), lines, source)
    kw = {k: data[k] for k in ("T", "nonnegative", "seed") if k in data}
    spec = _build("T" if "T" in data else "kernel",
                  lambda: ProblemSpec(dom, kern, ext, u0, stepping=pol, nonnegativity_box=box, **kw),
                  lines, source)
    if spec.nonnegative:
        u = _build("initial", spec.initial_values, lines, source)
        if np.any(u < 0):
            raise ConfigError("initial", "datum has negative values but nonnegative is true",
                              lines.get("initial"), source)
    return spec


def load_config(path) -> ProblemSpec:
    text = Path(path).read_text()
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<string>") -> ProblemSpec:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be a mapping", 1, source)
    return problem_from_dict(data, _line_map(text), source)


def dump_config(spec: ProblemSpec) -> str:
    return yaml.safe_dump(spec.as_dict(), sort_keys=False)
