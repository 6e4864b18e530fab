"""Discrete nonlocal operator L_K u, its energy, and a quadrature reference.

The discrete operator is

    (L u)_i = 2 sum_{j != i} Phi(u_i - u_j) W_ij(t) + 2 sum_k omega_ik Phi(u_i - g_ik)

with ``Phi(d) = |d|^(p-2) d`` (optionally regularized). Its energy

    E(u) = (h/p) sum_{i != j} W_ij Psi(u_i - u_j) + (2h/p) sum_{i,k} omega_ik Psi(u_i - g_ik)

satisfies ``grad E = h * L u`` exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .grid import Domain, GridFunction
from .kernel import (ExteriorCoefficients, ExteriorProfile, KernelSpec, KernelWeights,
                     assemble_weights, exterior_coefficients)


def phi(d, p: float, eps: float = 0.0) -> np.ndarray:
    """``(d^2 + eps^2)^((p-2)/2) d``; for ``eps = 0`` this is ``|d|^(p-2) d`` with ``phi(0) = 0``."""
    d = np.asarray(d, dtype=float)
    if eps == 0.0:
        return np.sign(d) * np.abs(d) ** (p - 1.0)
    return d * np.hypot(d, eps) ** (p - 2.0)


def dphi(d, p: float, eps: float) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if eps == 0.0:
        with np.errstate(divide="ignore"):
            return (p - 1.0) * np.abs(d) ** (p - 2.0)
    r = np.hypot(d, eps)
    return r ** (p - 2.0) * ((p - 1.0) * (d / r) ** 2 + (eps / r) ** 2)


def psi(d, p: float, eps: float = 0.0) -> np.ndarray:
    """Antiderivative of ``p * phi`` with ``psi(0) = 0``; ``psi = |d|^p`` when ``eps = 0``."""
    d = np.asarray(d, dtype=float)
    if eps == 0.0:
        return np.abs(d) ** p
    return np.hypot(d, eps) ** p - eps ** p


@dataclass(frozen=True)
class OperatorContext:
    weights: KernelWeights
    exterior: ExteriorCoefficients | None
    epsilon_reg: float = 0.0

    def __post_init__(self):
        if self.epsilon_reg < 0:
            raise ValueError("epsilon_reg must be >= 0")

    @property
    def p(self) -> float:
        return self.weights.spec.p

    @property
    def domain(self) -> Domain:
        return self.weights.domain

    def interior_only(self) -> "OperatorContext":
        return replace(self, exterior=None)

    def _eps(self, eps):
        return self.epsilon_reg if eps is None else eps

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u.values if isinstance(u, GridFunction) else u, dtype=float)
        if u.shape != (self.domain.M,):
            raise ValueError(f"dimension mismatch: expected {self.domain.M} values, got {u.shape}")
        return u

    def apply_values(self, u, t: float = 0.0, eps: float | None = None) -> np.ndarray:
        u = self._check(u)
        eps = self._eps(eps)
        p = self.p
        m = self.weights.factor(t)
        out = 2.0 * m * np.einsum("ij,ij->i", self.weights.W, phi(u[:, None] - u[None, :], p, eps))
        if self.exterior is not None:
            ext = self.exterior
            out += 2.0 * m * np.einsum("ik,ik->i", ext.omega, phi(u[:, None] - ext.g, p, eps))
        return out

    def apply(self, gf: GridFunction, t: float | None = None) -> GridFunction:
        t = gf.time if t is None else t
        return gf.with_values(self.apply_values(gf.values, t))

    def exterior_term(self, u, t: float = 0.0, eps: float | None = None) -> np.ndarray:
        u = self._check(u)
        if self.exterior is None:
            return np.zeros_like(u)
        ext = self.exterior
        return self.weights.factor(t) * np.einsum(
            "ik,ik->i", ext.omega, phi(u[:, None] - ext.g, self.p, self._eps(eps)))

    def energy(self, u, t: float = 0.0, eps: float | None = None) -> float:
        u = self._check(u)
        eps = self._eps(eps)
        p, h = self.p, self.domain.cell_measure
        m = self.weights.factor(t)
        e = (h / p) * m * float(np.sum(self.weights.W * psi(u[:, None] - u[None, :], p, eps)))
        if self.exterior is not None:
            ext = self.exterior
            e += (2.0 * h / p) * m * float(np.sum(ext.omega * psi(u[:, None] - ext.g, p, eps)))
        return e

    def energy_gradient(self, u, t: float = 0.0, eps: float | None = None) -> np.ndarray:
        return self.domain.cell_measure * self.apply_values(u, t, eps)

    def jacobian(self, u, t: float = 0.0, eps: float | None = None) -> np.ndarray:
        """Jacobian of ``apply_values`` (symmetric; needs ``eps > 0`` where differences vanish)."""
        u = self._check(u)
        eps = self._eps(eps)
        p = self.p
        m = self.weights.factor(t)
        B = 2.0 * m * self.weights.W * dphi(u[:, None] - u[None, :], p, eps)
        np.fill_diagonal(B, 0.0)
        J = -B
        diag = B.sum(axis=1)
        if self.exterior is not None:
            ext = self.exterior
            diag = diag + 2.0 * m * np.einsum("ik,ik->i", ext.omega, dphi(u[:, None] - ext.g, p, eps))
        J[np.diag_indices_from(J)] = diag
        return J


def build_context(domain: Domain, spec: KernelSpec, profile: ExteriorProfile | None = None,
                  epsilon_reg: float = 0.0, weights: KernelWeights | None = None,
                  exterior: bool = True) -> OperatorContext:
    kw = weights if weights is not None else assemble_weights(domain, spec)
    ext = exterior_coefficients(domain, spec, profile) if exterior else None
    return OperatorContext(kw, ext, epsilon_reg)


def apply(ctx: OperatorContext, gf: GridFunction, t: float | None = None) -> GridFunction:
    return ctx.apply(gf, t)


def energy(ctx: OperatorContext, gf: GridFunction, t: float | None = None) -> float:
    return ctx.energy(gf.values, gf.time if t is None else t)


# ---------------------------------------------------------------------------
# quadrature reference


class QuadratureFailure(RuntimeError):
    pass


def _taylor_coefficients(u, x: float, ux: float, h: float) -> tuple[float, float, float]:
    """First derivative, half the second and a sixth of the third, by central differences."""
    up1, um1 = float(u(x + h)), float(u(x - h))
    up2, um2 = float(u(x + 2 * h)), float(u(x - 2 * h))
    d1 = (-up2 + 8 * up1 - 8 * um1 + um2) / (12 * h)
    d2 = (-up2 + 16 * up1 - 30 * ux + 16 * um1 - um2) / (12 * h * h)
    d3 = (up2 - 2 * up1 + 2 * um1 - um2) / (2 * h ** 3)
    return d1, d2 / 2.0, d3 / 6.0


def reference_apply(u, x, p: float, s: float, *, interval: tuple[float, float] | None = None,
                    N: int = 1, epsrel: float = 1e-10, limit: int = 500,
                    tol: float = 1e-6, inner: float = 1e-3) -> np.ndarray:
    """Adaptive-quadrature evaluation of ``2 PV int Phi(u(x) - u(y)) |x - y|^-(N+ps) dy``.

    ``u`` is a vectorized callable. The symmetric form pairs ``y = x +- z`` so the
    principal value becomes an absolutely convergent integral over ``z > 0``.
    With ``interval=(a, b)`` only ``y`` inside the interval contributes.
    ``p = 2`` is accepted here for validation against the linear operator.

    On ``0 < z < inner`` the differences ``u(x) - u(x +- z)`` come from a cubic
    Taylor model of ``u`` at ``x`` (derivatives by central differences). Where
    ``u'(x) != 0`` the rounding error of the raw differences, amplified by
    ``z^-(1+ps)``, is not integrable. ``inner=0`` integrates the raw form down to
    0, which is reliable only where ``u'(x) = 0``.
    """
    if N != 1:
        raise ValueError("reference quadrature is one-dimensional")
    if not 1 < p <= 2:
        raise ValueError(f"reference_apply needs p in (1, 2], got {p}")
    sig = p * s
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for n, xv in enumerate(xs):
        ux = float(u(xv))
        if interval is None:
            zmax_r = zmax_l = np.inf
        else:
            zmax_r, zmax_l = interval[1] - xv, xv - interval[0]

        def g(z):
            val = 0.0
            if z < zmax_r:
                val += phi(ux - float(u(xv + z)), p)
            if z < zmax_l:
                val += phi(ux - float(u(xv - z)), p)
            return float(val) * z ** (-1.0 - sig)

        z0 = inner if 0 < inner < min(zmax_r, zmax_l) else 0.0
        if z0 > 0:
            d1, d2, d3 = _taylor_coefficients(u, xv, ux, 10.0 * z0)

            def g_model(z):
                even = d2 * z * z
                odd = z * (d1 + d3 * z * z)
                return float(phi(-odd - even, p) + phi(odd - even, p)) * z ** (-1.0 - sig)

        breaks = [0.0, 1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
        cut = min(zmax_r, zmax_l)
        if math.isfinite(cut) and cut > 0:
            breaks = sorted(set(b for b in breaks if b < max(zmax_r, zmax_l)) | {cut})
        if z0 > 0:
            breaks = sorted(set(b for b in breaks if b > z0) | {0.0, z0})
        zend = max(zmax_r, zmax_l)
        total, err = 0.0, 0.0
        pts = breaks + [zend]
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi <= lo:
                continue
            with warnings.catch_warnings():
                # cancellation near z = 0 trips quad's heuristics; the error budget is checked below
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                fn = g_model if hi <= z0 else g
                v, e = integrate.quad(fn, lo, hi, limit=limit, epsrel=epsrel, epsabs=1e-15)
            total += v
            err += e
        if err > tol * max(1.0, abs(total)):
            raise QuadratureFailure(f"reference quadrature at x={xv}: achieved error {err:.3g}")
        out[n] = 2.0 * total
    return out


# ---------------------------------------------------------------------------
# convergence against the quadrature reference


def apply_prototype(domain: Domain, p: float, s: float, u) -> np.ndarray:
    """Prototype operator (unit multiplier, zero exterior) for any ``p`` in ``(1, 2]``.

    Used for validation; ``p = 2`` gives the linear operator, which the
    kernel specification itself does not admit.
    """
    from .kernel import cell_integrals, exterior_mass_closed_form
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    u = np.asarray(u, dtype=float)
    sig = p * s
    I = cell_integrals(domain, sig)
    out = 2.0 * np.einsum("ij,ij->i", I, phi(u[:, None] - u[None, :], p))
    return out + 2.0 * exterior_mass_closed_form(domain, sig) * phi(u, p)


@dataclass
class ConvergenceStudy:
    p: float
    s: float
    x_target: float
    Ms: list
    x_eval: list
    discrete: list
    reference: list
    rel_errors: list
    order: float | None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def convergence_study(p: float, s: float, Ms=(128, 256, 512), a: float = -8.0, b: float = 8.0,
                      x_target: float = 0.0, u=None) -> ConvergenceStudy:
    """Compare the discrete operator with ``reference_apply`` at the cell center nearest ``x_target``.

    The order is the least-squares slope of log error against log h.
    """
    u = u or (lambda x: np.exp(-np.asarray(x, dtype=float) ** 2))
    xs, disc, ref, errs = [], [], [], []
    for M in Ms:
        dom = Domain(a, b, int(M))
        x = dom.centers
        i = int(np.argmin(np.abs(x - x_target)))
        val = float(apply_prototype(dom, p, s, u(x))[i])
        r = float(reference_apply(u, x[i], p, s)[0])
        xs.append(float(x[i]))
        disc.append(val)
        ref.append(r)
        errs.append(abs(val - r) / abs(r))
    order = None
    if len(Ms) >= 2 and all(e > 0 for e in errs):
        hs = np.array([(b - a) / M for M in Ms])
        order = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceStudy(p, s, x_target, [int(M) for M in Ms], xs, disc, ref, errs, order)
