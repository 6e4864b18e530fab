"""Uniform cell-centered 1D grids, grid functions and ball windows."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

MIN_CELLS = 8


@dataclass(frozen=True)
class Domain:
    """Interval ``(a, b)`` split into ``M`` equal cells.

    ``N`` is the spatial dimension used by every exponent formula. The mesh
    itself is one-dimensional, so simulations require ``N == 1``.
    """

    a: float
    b: float
    M: int
    N: int = 1

    def __post_init__(self):
        for name in ("a", "b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"domain endpoint {name} must be finite")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.M) != self.M or self.M < MIN_CELLS:
            raise ValueError(f"M too small: need an integer M >= {MIN_CELLS}, got {self.M}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M

    @property
    def cell_measure(self) -> float:
        return self.h ** self.N

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def centers(self) -> np.ndarray:
        x = self.a + (np.arange(self.M) + 0.5) * self.h
        x.setflags(write=False)
        return x

    def require_1d(self):
        if self.N != 1:
            raise ValueError(f"the mesh is one-dimensional; N={self.N} cannot be simulated")


def build_domain(a: float, b: float, M: int, N: int = 1) -> Domain:
    return Domain(float(a), float(b), int(M), int(N))


@dataclass(frozen=True)
class GridFunction:
    """Cell-center samples of ``u(., time)``."""

    domain: Domain
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.domain.M,):
            raise ValueError(f"expected {self.domain.M} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        if not (self.time >= 0 and math.isfinite(self.time)):
            raise ValueError(f"time must be finite and >= 0, got {self.time}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, time: float | None = None) -> "GridFunction":
        return GridFunction(self.domain, values, self.time if time is None else time)

    def to_csv(self, path):
        x = self.domain.centers
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for xi, vi in zip(x, self.values):
                w.writerow([repr(float(xi)), repr(float(vi))])

    @classmethod
    def from_csv(cls, path, domain: Domain, time: float = 0.0) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["x", "value"]:
            raise ValueError(f"{path}: expected header 'x,value'")
        xs = np.array([float(r[0]) for r in rows[1:]])
        vals = np.array([float(r[1]) for r in rows[1:]])
        if xs.shape != (domain.M,) or not np.allclose(xs, domain.centers, rtol=0, atol=1e-9 * domain.h):
            raise ValueError(f"{path}: x column does not match the domain cell centers")
        return cls(domain, vals, time)

    def to_json(self) -> str:
        return json.dumps({"time": float(self.time), "values": [float(v) for v in self.values]})

    @classmethod
    def from_json(cls, text: str, domain: Domain) -> "GridFunction":
        d = json.loads(text)
        return cls(domain, np.array(d["values"], dtype=float), float(d["time"]))


@dataclass(frozen=True)
class BallWindow:
    x0: float
    rho: float
    t1: float = 0.0
    t2: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.t1 < 0 or self.t2 < self.t1:
            raise ValueError(f"need 0 <= t1 <= t2, got t1={self.t1}, t2={self.t2}")

    def scaled(self, radius_factor: float) -> "BallWindow":
        return BallWindow(self.x0, self.rho * radius_factor, self.t1, self.t2)

    def as_dict(self) -> dict:
        return {"x0": self.x0, "rho": self.rho, "t1": self.t1, "t2": self.t2}


def ball_indices(domain: Domain, x0: float, rho: float) -> np.ndarray:
    """Indices of cells whose center lies in the open ball ``|x - x0| < rho``."""
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    return np.flatnonzero(np.abs(domain.centers - x0) < rho)


def complement_indices(domain: Domain, indices: np.ndarray) -> np.ndarray:
    return np.setdiff1d(np.arange(domain.M), indices, assume_unique=True)


def ball_measure(domain: Domain, indices: np.ndarray) -> float:
    """Discrete measure of a ball: number of member cells times the cell measure."""
    return len(indices) * domain.cell_measure


def raw_integral(values: np.ndarray, domain: Domain, indices: np.ndarray, r: float = 1.0) -> float:
    """``sum_i h^N |u_i|^r`` over ``indices`` (no root taken)."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if len(indices) == 0:
        return 0.0
    return float(domain.cell_measure * np.sum(np.abs(np.asarray(values)[indices]) ** r))


def windowed_lr_norm(gf: GridFunction, indices: np.ndarray, r: float) -> float:
    return raw_integral(gf.values, gf.domain, indices, r) ** (1.0 / r)


def pointwise_part(gf: GridFunction, sign: str) -> GridFunction:
    return gf.with_values(part(gf.values, sign))


def part(values, sign: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if sign in ("positive", "plus", "+"):
        return np.maximum(v, 0.0)
    if sign in ("negative", "minus", "-"):
        return np.maximum(-v, 0.0)
    if sign in ("absolute", "abs"):
        return np.abs(v)
    raise ValueError(f"unknown sign selector {sign!r}")
