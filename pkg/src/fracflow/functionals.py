"""Scalar quantities the estimates are phrased in: exponents, tails, masses, suprema."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Domain, ball_indices, ball_measure, complement_indices, part, raw_integral
from .kernel import ExteriorProfile, exterior_moment
from .stepper import Trajectory

UNDEFINED = "undefined"


@dataclass(frozen=True)
class Exponents:
    N: int
    p: float
    s: float
    r: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not 1 < self.p < 2:
            raise ValueError(f"p must lie in (1, 2), got {self.p}")
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")

    def lam(self, r: float) -> float:
        return self.N * (self.p - 2.0) + r * self.p * self.s

    @property
    def lambda_r(self) -> float:
        return self.lam(self.r)

    @property
    def lambda_1(self) -> float:
        return self.lam(1.0)

    @property
    def lambda_2(self) -> float:
        return self.lam(2.0)

    @property
    def p_c(self) -> float:
        return 2.0 * self.N / (self.N + 2.0 * self.s)

    @property
    def p_restricted(self) -> float:
        return 2.0 * self.N / (self.N + self.s)

    @property
    def p_star_s(self):
        """Fractional Sobolev exponent, or ``UNDEFINED`` when ``N <= ps``."""
        if self.N <= self.p * self.s:
            return UNDEFINED
        return self.N * self.p / (self.N - self.p * self.s)

    @property
    def q_ext(self) -> float:
        return self.N * (2.0 - self.p) / (self.p * self.s)

    @property
    def subcritical(self) -> bool:
        return self.p < self.p_c

    @property
    def restricted_supercritical(self) -> bool:
        return self.p > self.p_restricted

    @property
    def regime(self) -> str:
        if self.subcritical:
            return "subcritical"
        if self.restricted_supercritical:
            return "restricted_supercritical"
        return "supercritical"

    def as_dict(self) -> dict:
        return {"N": self.N, "p": self.p, "s": self.s, "r": self.r, "lambda_r": self.lambda_r,
                "lambda_1": self.lambda_1, "lambda_2": self.lambda_2, "p_c": self.p_c,
                "p_restricted": self.p_restricted, "p_star_s": self.p_star_s,
                "q_ext": self.q_ext, "regime": self.regime}


def compute_exponents(N: int, p: float, s: float, r: float = 1.0) -> Exponents:
    return Exponents(int(N), float(p), float(s), float(r))


# ---------------------------------------------------------------------------
# time handling


def time_integral(times: np.ndarray, values: np.ndarray, t1: float, t2: float) -> float:
    """Exact integral over ``[t1, t2]`` of the piecewise-linear interpolant of ``values``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if t2 < t1:
        raise ValueError("need t1 <= t2")
    slack = 1e-12 * max(1.0, abs(t2))
    if t1 < times[0] - slack or t2 > times[-1] + slack:
        raise ValueError(f"interval [{t1}, {t2}] outside trajectory span [{times[0]}, {times[-1]}]")
    if t2 == t1:
        return 0.0
    inner = (times > t1) & (times < t2)
    ts = np.concatenate([[t1], times[inner], [t2]])
    vs = np.interp(ts, times, values)
    return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


def _window_or_raise(traj: Trajectory, t1: float, t2: float) -> np.ndarray:
    idx = traj.window(t1, t2)
    if len(idx) == 0:
        raise ValueError(f"no snapshots in window [{t1}, {t2}]")
    return idx


# ---------------------------------------------------------------------------
# tails


@dataclass(frozen=True)
class TailResult:
    value: float
    grid_part: float
    exterior_part: float
    argmax_time: float | None
    snapshot_count: int

    def as_dict(self) -> dict:
        return {"value": self.value, "grid_part": self.grid_part, "exterior_part": self.exterior_part,
                "argmax_time": self.argmax_time, "snapshot_count": self.snapshot_count}


def tail_slice(values, domain: Domain, x0: float, rho: float, p: float, s: float,
               exterior: ExteriorProfile, transform: Callable) -> tuple[float, float, float]:
    """Tail at a single time: returns ``(value, grid part, exterior part)``.

    ``transform`` maps raw values of u (on the grid and outside it) to the
    nonnegative quantity whose ``p - 1`` power enters the integral.
    """
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    sig = p * s
    N = domain.N
    out = complement_indices(domain, ball_indices(domain, x0, rho))
    grid = 0.0
    if len(out):
        vals = np.asarray(transform(np.asarray(values, dtype=float)[out]))
        dist = np.abs(domain.centers[out] - x0)
        grid = float(domain.cell_measure * np.sum(vals ** (p - 1.0) * dist ** (-(N + sig))))
    ext = exterior_moment(exterior, lambda g: np.asarray(transform(g)) ** (p - 1.0),
                          x0, domain, rho, sig)
    grid *= rho ** sig
    ext *= rho ** sig
    return (grid + ext) ** (1.0 / (p - 1.0)), grid, ext


def _selector(sign: str) -> Callable:
    if sign not in ("plus", "minus", "abs", "positive", "negative", "absolute", "+", "-"):
        raise ValueError(f"unknown tail part {sign!r}")
    return lambda v: part(v, sign)


def tail(traj: Trajectory, x0: float, rho: float, t1: float, t2: float, sign: str = "abs",
         p: float | None = None, s: float | None = None, transform: Callable | None = None) -> TailResult:
    """Temporal sup over snapshots in ``[t1, t2]`` of the nonlocal tail."""
    p = traj.kernel.p if p is None else p
    s = traj.kernel.s if s is None else s
    tf = transform if transform is not None else _selector(sign)
    idx = _window_or_raise(traj, t1, t2)
    best = (-1.0, 0.0, 0.0, None)
    for i in idx:
        snap = traj.snapshots[i]
        v, g, e = tail_slice(snap.values, traj.domain, x0, rho, p, s, traj.exterior, tf)
        if v > best[0]:
            best = (v, g, e, snap.time)
    return TailResult(best[0], best[1], best[2], best[3], len(idx))


def tail_of_profile(profile: ExteriorProfile, domain: Domain, x0: float, rho: float, p: float,
                    s: float, sign: str = "abs") -> TailResult:
    """Tail of exterior data alone (grid values taken as zero)."""
    v, g, e = tail_slice(np.zeros(domain.M), domain, x0, rho, p, s, profile, _selector(sign))
    return TailResult(v, g, e, None, 0)


# ---------------------------------------------------------------------------
# perturbation


@dataclass(frozen=True)
class PerturbationTerm:
    value: float
    time_ratio_power: float
    tail_factor: float
    max_selector_branch: str

    def as_dict(self) -> dict:
        return {"value": self.value, "time_ratio_power": self.time_ratio_power,
                "tail_factor": self.tail_factor, "max_selector_branch": self.max_selector_branch}


def max_factor(t: float, rho: float, p: float, s: float, tail_value: float) -> tuple[float, float]:
    """``max{1, (t/rho^ps)^((1-p)/(2-p)) Tail^(p-1)}`` and its second argument."""
    ratio = t / rho ** (p * s)
    tf = ratio ** ((1.0 - p) / (2.0 - p)) * tail_value ** (p - 1.0)
    return max(1.0, tf), tf


def perturbation(t: float, rho: float, p: float, s: float, tail_value: float) -> PerturbationTerm:
    if not (t > 0 and rho > 0):
        raise ValueError("perturbation needs t > 0 and rho > 0")
    if tail_value < 0:
        raise ValueError("tail value must be >= 0")
    ratio = t / rho ** (p * s)
    trp = ratio ** (1.0 / (2.0 - p))
    mf, tf = max_factor(t, rho, p, s, tail_value)
    return PerturbationTerm(trp * mf, trp, tf, "tail" if tf > 1.0 else "one")


# ---------------------------------------------------------------------------
# masses and suprema


def ball_integrals(traj: Trajectory, x0: float, rho: float, r: float = 1.0,
                   sign: str = "abs") -> np.ndarray:
    """``sum_{B_rho} h |u_part|^r`` for every snapshot."""
    idx = ball_indices(traj.domain, x0, rho)
    return np.array([raw_integral(part(sn.values, sign), traj.domain, idx, r)
                     for sn in traj.snapshots])


def mass_window(traj: Trajectory, x0: float, rho: float, t1: float, t2: float,
                mode: str = "sup", r: float = 1.0, sign: str = "abs") -> float:
    if mode not in ("sup", "inf"):
        raise ValueError(f"mode must be 'sup' or 'inf', got {mode!r}")
    w = _window_or_raise(traj, t1, t2)
    vals = ball_integrals(traj, x0, rho, r, sign)[w]
    return float(vals.max() if mode == "sup" else vals.min())


def sup_cylinder(traj: Trajectory, x0: float, rho: float, t1: float, t2: float,
                 absolute: bool = False) -> float:
    w = _window_or_raise(traj, t1, t2)
    idx = ball_indices(traj.domain, x0, rho)
    if len(idx) == 0:
        return 0.0
    block = traj.values[np.ix_(w, idx)]
    return float((np.abs(block) if absolute else block).max())


def space_time_mean(traj: Trajectory, x0: float, rho: float, t1: float, t2: float,
                    r: float = 1.0, sign: str = "abs") -> float:
    """Average of ``|u_part|^r`` over ``B_rho x (t1, t2)`` with the discrete ball measure."""
    idx = ball_indices(traj.domain, x0, rho)
    meas = ball_measure(traj.domain, idx)
    if meas == 0 or t2 <= t1:
        raise ValueError("degenerate space-time window")
    integ = time_integral(traj.times, ball_integrals(traj, x0, rho, r, sign), t1, t2)
    return integ / (meas * (t2 - t1))


@dataclass
class Measurement:
    name: str
    window: dict
    value: float
    parts: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "window": self.window, "value": self.value, "parts": self.parts}


def measure(traj: Trajectory, name: str, x0: float = 0.0, rho: float = 0.5,
            t1: float = 0.0, t2: float | None = None, r: float = 1.0,
            sign: str = "abs") -> Measurement:
    """Dispatch used by the ``measure`` command."""
    t2 = traj.times[-1] if t2 is None else t2
    win = {"x0": x0, "rho": rho, "t1": t1, "t2": t2}
    if name == "tail":
        tr = tail(traj, x0, rho, t1, t2, sign)
        return Measurement(name, win, tr.value, tr.as_dict())
    if name in ("mass_sup", "mass_inf"):
        return Measurement(name, win, mass_window(traj, x0, rho, t1, t2, name[5:], r, sign), {"r": r})
    if name == "sup_cylinder":
        return Measurement(name, win, sup_cylinder(traj, x0, rho, t1, t2, sign == "abs"))
    if name == "exponents":
        ex = compute_exponents(traj.domain.N, traj.kernel.p, traj.kernel.s, r)
        return Measurement(name, win, ex.lambda_r, ex.as_dict())
    if name == "perturbation":
        tr = tail(traj, x0, rho, t1, t2, sign)
        pt = perturbation(t2 - t1 if t2 > t1 else t2, rho, traj.kernel.p, traj.kernel.s, tr.value)
        return Measurement(name, win, pt.value, {**pt.as_dict(), "tail": tr.value})
    raise ValueError(f"unknown measurement {name!r}")


def finite_or_none(x: float):
    return x if math.isfinite(x) else None
