"""Discrete kernel weights for K(x, y, t) = mu(x, y, t) |x - y|^-(N + ps).

Cell measures are folded into the weights: ``W[i, j]`` approximates
``int_{cell j} K(x_i, y) dy``, so the operator is a plain weighted sum.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .grid import Domain

# ---------------------------------------------------------------------------
# multipliers


@dataclass(frozen=True)
class Multiplier:
    """Bounded symmetric factor mu(x, y, t) = m(t) * mu0(x, y)."""

    kind: str = "constant"
    c: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    period: float = 1.0
    frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "checkerboard", "time_modulated"):
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind == "constant" and not self.c > 0:
            raise ValueError("constant multiplier needs c > 0")
        if self.kind != "constant":
            if not 0 < self.c1 <= self.c2:
                raise ValueError(f"multiplier needs 0 < c1 <= c2, got c1={self.c1}, c2={self.c2}")
        if self.kind == "checkerboard" and not self.period > 0:
            raise ValueError("checkerboard multiplier needs period > 0")

    @property
    def time_dependent(self) -> bool:
        return self.kind == "time_modulated"

    def _profile(self, x):
        # mu0(x, y) = f(x) f(y) keeps the checkerboard symmetric by construction
        # float parity: exterior quadrature nodes can exceed the int64 range
        cell = np.floor(np.asarray(x, dtype=float) / self.period)
        return np.where(np.fmod(cell, 2.0) == 0, math.sqrt(self.c1), math.sqrt(self.c2))

    def spatial(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.kind == "constant":
            return np.full(x.shape, float(self.c))
        if self.kind == "checkerboard":
            return self._profile(x) * self._profile(y)
        return np.ones(x.shape)

    def time_factor(self, t: float) -> float:
        if self.kind != "time_modulated":
            return 1.0
        return self.c1 + 0.5 * (self.c2 - self.c1) * (1.0 + math.sin(2.0 * math.pi * self.frequency * t))

    def __call__(self, x, y, t: float = 0.0) -> np.ndarray:
        return self.time_factor(t) * self.spatial(x, y)

    def bounds(self) -> tuple[float, float]:
        if self.kind == "constant":
            return (self.c, self.c)
        return (self.c1, self.c2)

    def as_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "c": self.c}
        if self.kind == "checkerboard":
            return {"kind": "checkerboard", "c1": self.c1, "c2": self.c2, "period": self.period}
        return {"kind": "time_modulated", "c1": self.c1, "c2": self.c2, "frequency": self.frequency}


def constant(c: float = 1.0) -> Multiplier:
    return Multiplier("constant", c=c)


def checkerboard(c1: float, c2: float, period: float) -> Multiplier:
    return Multiplier("checkerboard", c1=c1, c2=c2, period=period)


def time_modulated(c1: float, c2: float, frequency: float) -> Multiplier:
    return Multiplier("time_modulated", c1=c1, c2=c2, frequency=frequency)


@dataclass(frozen=True)
class KernelSpec:
    p: float
    s: float
    C1: float = 1.0
    C2: float = 1.0
    multiplier: Multiplier = field(default_factory=Multiplier)

    def __post_init__(self):
        if not 1 < self.p < 2:
            raise ValueError(f"p must lie in (1, 2), got p={self.p}")
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got s={self.s}")
        if not 0 < self.C1 <= self.C2:
            raise ValueError(f"need 0 < C1 <= C2, got C1={self.C1}, C2={self.C2}")

    @property
    def sigma(self) -> float:
        """The kernel order ``p * s``."""
        return self.p * self.s

    def as_dict(self) -> dict:
        return {"p": self.p, "s": self.s, "C1": self.C1, "C2": self.C2,
                "multiplier": self.multiplier.as_dict()}


# ---------------------------------------------------------------------------
# exterior data


@dataclass(frozen=True)
class ExteriorProfile:
    """Values of u on the complement of the computational box.

    ``power_decay`` means ``c * |y|^beta``; ``tabulated`` interpolates
    ``samples`` (pairs ``(y, g)``) linearly and holds the end values.
    """

    kind: str = "zero"
    c: float = 0.0
    beta: float = 0.0
    samples: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "power_decay", "tabulated"):
            raise ValueError(f"unknown exterior profile kind {self.kind!r}")
        if self.kind == "tabulated":
            pts = np.asarray(self.samples, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
                raise ValueError("tabulated profile needs a list of (y, value) pairs")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError("tabulated profile abscissae must be strictly increasing")
            object.__setattr__(self, "samples", tuple(map(tuple, pts.tolist())))

    @property
    def is_constant(self) -> bool:
        return self.kind in ("zero", "constant")

    @property
    def constant_value(self) -> float:
        return 0.0 if self.kind == "zero" else float(self.c)

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "constant":
            return np.full_like(y, self.c)
        if self.kind == "power_decay":
            return self.c * np.abs(y) ** self.beta
        pts = np.asarray(self.samples)
        return np.interp(y, pts[:, 0], pts[:, 1])

    def is_nonnegative(self) -> bool:
        if self.is_constant or self.kind == "power_decay":
            return self.constant_value >= 0 if self.is_constant else self.c >= 0
        return bool(np.all(np.asarray(self.samples)[:, 1] >= 0))

    def as_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["c"] = self.c
        elif self.kind == "power_decay":
            d.update(c=self.c, beta=self.beta)
        elif self.kind == "tabulated":
            d["samples"] = [list(s) for s in self.samples]
        return d


def check_exterior_admissible(profile: ExteriorProfile, domain: Domain, spec: KernelSpec) -> float:
    """Growth integral of the exterior data; raises if it diverges.

    Returns ``int_{Omega^c} |g|^(p-1) (1 + |y|)^-(N+ps) dy``.
    """
    p, sig = spec.p, spec.sigma
    if profile.kind == "power_decay" and profile.c != 0 and profile.beta * (p - 1) >= sig:
        raise ValueError(
            f"power_decay profile is inadmissible: need beta < ps/(p-1) = {sig / (p - 1):.6g}, "
            f"got beta={profile.beta}")

    def f(y):
        return abs(float(profile.evaluate(y))) ** (p - 1) * (1.0 + abs(y)) ** (-(domain.N + sig))

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total += integrate.quad(f, domain.b, np.inf, limit=200)[0]
            total += integrate.quad(f, -np.inf, domain.a, limit=200)[0]
        except integrate.IntegrationWarning as exc:
            raise ValueError(f"exterior profile growth integral does not converge: {exc}") from None
    if not math.isfinite(total):
        raise ValueError("exterior profile growth integral diverges")
    return total


# ---------------------------------------------------------------------------
# weights


def cell_integrals(domain: Domain, sigma: float) -> np.ndarray:
    """``I[i, j] = int_{cell j} |x_i - y|^-(1+sigma) dy`` in closed form, zero diagonal."""
    domain.require_1d()
    h = domain.h
    k = np.abs(np.arange(domain.M)[:, None] - np.arange(domain.M)[None, :])
    d = k * h
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.abs(d - 0.5 * h) ** (-sigma)
        far = (d + 0.5 * h) ** (-sigma)
        out = (near - far) / sigma
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class KernelWeights:
    domain: Domain
    spec: KernelSpec
    W: np.ndarray

    @property
    def time_dependent(self) -> bool:
        return self.spec.multiplier.time_dependent

    def factor(self, t: float) -> float:
        return self.spec.multiplier.time_factor(t)

    def at(self, t: float) -> np.ndarray:
        m = self.factor(t)
        return self.W if m == 1.0 else m * self.W


def assemble_weights(domain: Domain, spec: KernelSpec) -> KernelWeights:
    """Product-quadrature weights ``mu(x_i, x_j) * I_ij`` (time factor applied later)."""
    sig = spec.sigma
    if sig >= 1 and domain.M < 32:
        warnings.warn(
            f"ps = {sig:.3g} >= 1 on a coarse grid (M={domain.M}): near-diagonal weights "
            f"grow like h^-ps and the singular kernel is under-resolved", RuntimeWarning)
    I = cell_integrals(domain, sig)
    x = domain.centers
    W = spec.multiplier.spatial(x[:, None], x[None, :]) * I
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    if not np.all(np.isfinite(W)):
        raise FloatingPointError("non-finite kernel weights (overflow in near-diagonal integrals)")
    if np.any((W == 0) & (I > 0)):
        raise FloatingPointError("kernel weights underflowed to zero")
    W.setflags(write=False)
    return KernelWeights(domain, spec, W)


@dataclass
class KernelValidation:
    passed: bool
    samples: int
    symmetry_violations: int
    bound_violations: int
    mu_min: float
    mu_max: float
    messages: list

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def validate_kernel(spec: KernelSpec, sample_count: int = 1000, seed: int = 0,
                    span: float = 10.0, t_max: float = 10.0) -> KernelValidation:
    """Sample mu on random (x, y, t) and report symmetry / bound violations."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-span, span, sample_count)
    y = rng.uniform(-span, span, sample_count)
    t = rng.uniform(0.0, t_max, sample_count)
    mu = spec.multiplier
    fwd = np.array([mu(xi, yi, ti) for xi, yi, ti in zip(x, y, t)], dtype=float)
    bwd = np.array([mu(yi, xi, ti) for xi, yi, ti in zip(x, y, t)], dtype=float)
    sym_bad = int(np.count_nonzero(fwd != bwd))
    bnd_bad = int(np.count_nonzero((fwd < spec.C1) | (fwd > spec.C2)))
    msgs = []
    if sym_bad:
        msgs.append(f"K(x,y,t) != K(y,x,t) at {sym_bad} samples")
    if bnd_bad:
        msgs.append(f"mu outside [C1, C2] = [{spec.C1}, {spec.C2}] at {bnd_bad} samples "
                    f"(observed range [{fwd.min():.6g}, {fwd.max():.6g}])")
    return KernelValidation(not msgs, sample_count, sym_bad, bnd_bad,
                            float(fwd.min()), float(fwd.max()), msgs)


# ---------------------------------------------------------------------------
# exterior coefficients


def _panel_nodes(n_panels: int = 8, per_panel: int = 16, ratio: float = 0.25):
    """Gauss-Legendre nodes/weights on (0, 1), panels refined geometrically toward 0."""
    gx, gw = np.polynomial.legendre.leggauss(per_panel)
    edges = [ratio ** k for k in range(n_panels)] + [0.0]
    nodes, weights = [], []
    for hi, lo in zip(edges[:-1], edges[1:]):
        nodes.append(lo + (hi - lo) * 0.5 * (gx + 1.0))
        weights.append(0.5 * (hi - lo) * gw)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class ExteriorCoefficients:
    """Quadrature of ``int_{Omega^c} F(g(y)) mu(x_i, y) |x_i - y|^-(1+ps) dy``.

    Row ``i`` of ``omega`` holds weights for the exterior samples ``g[i]``; for
    constant profiles with a constant multiplier there is a single closed-form
    column.
    """

    profile: ExteriorProfile
    g: np.ndarray
    omega: np.ndarray

    @property
    def E0(self) -> np.ndarray:
        return self.omega.sum(axis=1)

    @property
    def is_zero(self) -> bool:
        return self.profile.kind == "zero" or (self.profile.is_constant and self.profile.c == 0)


def exterior_mass_closed_form(domain: Domain, sigma: float, x=None) -> np.ndarray:
    """``int_{Omega^c} |x - y|^-(1+sigma) dy`` for points inside the box."""
    x = domain.centers if x is None else np.asarray(x, dtype=float)
    return ((domain.b - x) ** (-sigma) + (x - domain.a) ** (-sigma)) / sigma


def exterior_coefficients(domain: Domain, spec: KernelSpec,
                          profile: ExteriorProfile | None = None) -> ExteriorCoefficients:
    profile = profile or ExteriorProfile()
    check_exterior_admissible(profile, domain, spec)
    sig = spec.sigma
    x = domain.centers
    mu = spec.multiplier
    if profile.is_constant and mu.kind != "checkerboard":
        c = mu.c if mu.kind == "constant" else 1.0
        omega = (c * exterior_mass_closed_form(domain, sig))[:, None]
        g = np.full((domain.M, 1), profile.constant_value)
        return ExteriorCoefficients(profile, g, omega)
    # substitution w = z^-sigma maps z in (d, inf) onto the finite interval (0, d^-sigma)
    v, vw = _panel_nodes()
    cols_g, cols_w = [], []
    for side, dist in ((1.0, domain.b - x), (-1.0, x - domain.a)):
        wmax = dist ** (-sig)
        w = wmax[:, None] * v[None, :]
        z = w ** (-1.0 / sig)
        y = x[:, None] + side * z
        cols_g.append(profile.evaluate(y))
        cols_w.append(mu.spatial(x[:, None], y) * (wmax[:, None] * vw[None, :]) / sig)
    return ExteriorCoefficients(profile, np.hstack(cols_g), np.hstack(cols_w))


def exterior_moment(profile: ExteriorProfile, fn, x0: float, domain: Domain, rho: float,
                    sigma: float) -> float:
    """``int fn(g(y)) |y - x0|^-(1+sigma) dy`` over ``y`` outside both the box and ``B_rho(x0)``.

    ``fn`` maps exterior values to the integrand (e.g. ``|g_+|^(p-1)``).
    """
    d_right = max(domain.b - x0, rho)
    d_left = max(x0 - domain.a, rho)
    if profile.is_constant:
        val = float(fn(np.array(profile.constant_value)))
        if val == 0.0:
            return 0.0
        return val * (d_right ** (-sigma) + d_left ** (-sigma)) / sigma
    total = 0.0
    for side, d in ((1.0, d_right), (-1.0, d_left)):
        def f(w, side=side):
            y = x0 + side * w ** (-1.0 / sigma)
            return float(fn(profile.evaluate(np.array(y))))
        val, _ = integrate.quad(f, 0.0, d ** (-sigma), limit=400, epsrel=1e-10, epsabs=0.0)
        total += val / sigma
    return total


# ---------------------------------------------------------------------------
# cache


_MAGIC = b"FFKW0001"
_HEADER = struct.Struct("<8sqdd32s")


def weights_key(domain: Domain, spec: KernelSpec) -> bytes:
    payload = json.dumps({"domain": [domain.a, domain.b, domain.M, domain.N],
                          "kernel": spec.as_dict()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).digest()


def save_weights(path, kw: KernelWeights):
    key = weights_key(kw.domain, kw.spec)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, kw.domain.M, kw.spec.p, kw.spec.s, key))
        fh.write(np.ascontiguousarray(kw.W, dtype="<f8").tobytes())


def load_weights(path, domain: Domain, spec: KernelSpec) -> KernelWeights:
    with open(path, "rb") as fh:
        magic, M, p, s, key = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a kernel weight cache file")
        if key != weights_key(domain, spec) or M != domain.M:
            raise ValueError(f"{path}: cache key does not match (domain, kernel)")
        W = np.frombuffer(fh.read(), dtype="<f8").reshape(M, M).astype(float)
    W.setflags(write=False)
    return KernelWeights(domain, spec, W)


def cached_weights(domain: Domain, spec: KernelSpec, cache_dir=None) -> KernelWeights:
    """Assemble, or load from ``cache_dir`` (default ``$FRACFLOW_CACHE``; no cache if unset)."""
    cache_dir = cache_dir or os.environ.get("FRACFLOW_CACHE")
    if not cache_dir:
        return assemble_weights(domain, spec)
    path = Path(cache_dir) / (weights_key(domain, spec).hex() + ".kw")
    if path.exists():
        try:
            return load_weights(path, domain, spec)
        except ValueError:
            pass
    kw = assemble_weights(domain, spec)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_weights(path, kw)
    return kw
