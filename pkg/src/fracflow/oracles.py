"""Independent ground truth: ODE envelopes, time mollifiers, iteration lemmas,
elementary inequalities, the amplitude-scaling symmetry and a Fourier check."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import integrate, optimize, special

from .grid import GridFunction, raw_integral
from .kernel import ExteriorProfile
from .stepper import Trajectory

# ---------------------------------------------------------------------------
# ODE envelope


@dataclass(frozen=True)
class OdeEnvelope:
    """Solution of ``U' = -c U^alpha`` with ``U(0) = U0``."""

    U0: float
    c: float
    alpha: float

    def __post_init__(self):
        if self.U0 < 0:
            raise ValueError("U0 must be >= 0")
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def extinction_time(self) -> float:
        return self.U0 ** (1.0 - self.alpha) / (self.c * (1.0 - self.alpha))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be >= 0")
        base = np.maximum(self.U0 ** (1.0 - self.alpha) - self.c * (1.0 - self.alpha) * t, 0.0)
        return base ** (1.0 / (1.0 - self.alpha))


def ode_envelope_eval(env: OdeEnvelope, t):
    return env(t)


def ode_exponent(p: float, q: float) -> float:
    """Exponent ``(p + q - 2)/q`` of the norm ODE; equals ``p/2`` for ``q = 2``."""
    return (p + q - 2.0) / q


@dataclass
class OdeComparisonReport:
    q: float
    alpha: float
    c_obs: float | None
    monotone: bool
    envelope_ok: bool
    max_envelope_ratio: float | None
    intervals: int
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def check_ode_comparison(traj: Trajectory, q: float | None = None, envelope_tol: float = 0.05,
                         monotone_tol: float = 1e-9) -> OdeComparisonReport:
    """Measure the decay constant of ``U = ||u||_q^q`` against the norm ODE.

    ``Z = U^((2-p)/q)`` must decrease at rate at least ``(1 - alpha) c_obs``;
    ``c_obs`` is the smallest observed rate over snapshot intervals before the
    extinction tolerance is reached.
    """
    p = traj.kernel.p
    if q is None:
        from .functionals import compute_exponents
        ex = compute_exponents(traj.domain.N, p, traj.kernel.s)
        q = ex.q_ext if ex.subcritical else 2.0
    alpha = ode_exponent(p, q)
    dom = traj.domain
    allc = np.arange(dom.M)
    U = np.array([raw_integral(s.values, dom, allc, q) for s in traj.snapshots])
    times = traj.times
    if U[0] == 0:
        return OdeComparisonReport(q, alpha, None, True, True, None, 0, True, "zero data")
    tol = traj.meta.get("extinction_tol", 1e-6)
    sups = traj.sup_abs
    alive = np.flatnonzero(sups > tol * sups[0])
    last = int(alive[-1]) if len(alive) else 0
    Z = U[: last + 1] ** ((2.0 - p) / q)
    ts = times[: last + 1]
    if len(Z) < 2:
        return OdeComparisonReport(q, alpha, None, True, True, None, 0, False, "fewer than two snapshots")
    rates = -np.diff(Z) / np.diff(ts) / (1.0 - alpha)
    monotone = bool(np.all(np.diff(Z) <= monotone_tol * Z[0]))
    c_obs = float(rates.min())
    env_ok, ratio = True, None
    if c_obs > 0:
        env = OdeEnvelope(float(U[0]), c_obs, alpha)
        bound = env(ts)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(bound > 0, U[: last + 1] / bound, np.where(U[: last + 1] > 0, np.inf, 1.0))
        ratio = float(np.max(r))
        env_ok = ratio <= 1.0 + envelope_tol
    return OdeComparisonReport(q, alpha, c_obs, monotone, env_ok, ratio, len(rates),
                               bool(c_obs > 0 and monotone and env_ok))


# ---------------------------------------------------------------------------
# exponential time mollification


@dataclass(frozen=True)
class MollifierParams:
    h: float
    direction: str = "forward"

    def __post_init__(self):
        if not 0 < self.h < 1:
            raise ValueError(f"h must lie in (0, 1), got {self.h}")
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be 'forward' or 'backward', got {self.direction!r}")


def mollify_values(times, values, params: MollifierParams) -> np.ndarray:
    """Mollify samples ``values[k]`` taken at ``times[k]`` (any trailing shape).

    The convolution is integrated exactly against the piecewise-linear
    interpolant in time.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 1:
        raise ValueError("empty trajectory")
    h = params.h
    out = np.zeros_like(v)
    if params.direction == "forward":
        # v_h(t0) = 0 only when t0 = 0; otherwise the history before t0 is absent
        out[0] = v[0] * -np.expm1(-t[0] / h) if t[0] > 0 else 0.0
        for k in range(len(t) - 1):
            d = t[k + 1] - t[k]
            one_m_e = -np.expm1(-d / h)
            slope = (v[k + 1] - v[k]) / d
            out[k + 1] = (1.0 - one_m_e) * out[k] + v[k] * one_m_e + slope * (d - h * one_m_e)
    else:
        out[-1] = 0.0
        for k in range(len(t) - 2, -1, -1):
            d = t[k + 1] - t[k]
            one_m_e = -np.expm1(-d / h)
            slope = (v[k + 1] - v[k]) / d
            out[k] = (1.0 - one_m_e) * out[k + 1] + v[k + 1] * one_m_e - slope * (d - h * one_m_e)
    return out


def mollify(traj: Trajectory, params: MollifierParams) -> Trajectory:
    if len(traj.snapshots) < 3:
        raise ValueError("mollification needs at least three snapshots")
    vals = mollify_values(traj.times, traj.values, params)
    snaps = tuple(GridFunction(traj.domain, vals[i], s.time) for i, s in enumerate(traj.snapshots))
    meta = dict(traj.meta, mollifier=asdict(params))
    if params.h <= np.max(np.diff(traj.times)):
        meta["mollifier_warning"] = "h is not larger than the snapshot spacing"
    return Trajectory(snaps, traj.dt_history, None, traj.kernel, traj.exterior, traj.problem, meta)


def mollifier_identity_residual(times, values, params: MollifierParams, t_min: float | None = None) -> float:
    """Max over interior nodes of the centered-difference residual of the derivative identity.

    The residual is ``O(dt^2)`` where ``v`` is smooth in time. ``t_min`` drops
    nodes before it, e.g. an initial layer where a solution is not ``C^3`` in time.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    vh = mollify_values(t, v, params)
    dt = t[2:] - t[:-2]
    deriv = (vh[2:] - vh[:-2]) / dt.reshape((-1,) + (1,) * (v.ndim - 1))
    if params.direction == "forward":
        target = (v[1:-1] - vh[1:-1]) / params.h
    else:
        target = (vh[1:-1] - v[1:-1]) / params.h
    resid = np.abs(deriv - target)
    if t_min is not None:
        resid = resid[t[1:-1] >= t_min]
        if resid.size == 0:
            raise ValueError(f"no interior nodes at or after t_min={t_min}")
    return float(np.max(resid))


# ---------------------------------------------------------------------------
# iteration lemmas


@dataclass
class FastConvergenceReport:
    hypothesis_met: bool
    converged: bool
    implication_holds: bool
    threshold: float
    iterations: int
    final_log_y: float
    first_terms: list = field(default_factory=list)
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def check_fast_convergence(C: float, b: float, eta: float, Y0: float, n_max: int = 5000,
                           small: float = 1e-30, equality_tol: float = 1e-12) -> FastConvergenceReport:
    """Iterate the extremal recursion ``Y_{n+1} = C b^n Y_n^(1+eta)`` in normalized logs.

    With ``z_n = log Y_n - log(threshold) + (n/eta) log b`` the recursion is
    exactly ``z_{n+1} = (1 + eta) z_n``, which is stable to evaluate. Values of
    ``|z_0|`` below ``equality_tol`` are treated as the threshold itself.
    """
    if not (C > 1 and b > 1 and eta > 0):
        raise ValueError("need C > 1, b > 1, eta > 0")
    if Y0 < 0:
        raise ValueError("Y0 must be >= 0")
    lthr = -math.log(C) / eta - math.log(b) / eta ** 2
    thr = math.exp(lthr)
    if Y0 == 0:
        return FastConvergenceReport(True, True, True, thr, 0, -math.inf, [0.0, 0.0, 0.0])
    lb = math.log(b)
    z = math.log(Y0) - lthr
    if abs(z) <= equality_tol:
        z = 0.0
    hyp = z <= 0.0
    need = max(0.0, eta * (lthr - math.log(small)) / lb)
    n_cap = max(n_max, int(math.ceil(need)) + 2)
    first = []
    n = 0
    ly = lthr + z
    converged = False
    while n <= n_cap:
        ly = lthr - n * lb / eta + z
        if n < 5:
            first.append(math.exp(ly) if ly > -745 else 0.0)
        if ly < math.log(small) and z <= 0:
            converged = True
            break
        if z > 1e300:
            break
        z *= 1.0 + eta
        n += 1
    note = "" if hyp else "hypothesis unmet, no prediction"
    return FastConvergenceReport(hyp, converged, (not hyp) or converged, thr, n, ly, first, note)


@dataclass
class InterpolationReport:
    applicable: bool
    bound: float
    Y0: float
    holds: bool | None
    slack: float | None
    note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def check_interpolation(C: float, b: float, eta: float, sequence, rtol: float = 1e-9) -> InterpolationReport:
    if not (C > 0 and b > 1 and 0 < eta < 1):
        raise ValueError("need C > 0, b > 1, 0 < eta < 1")
    Y = np.asarray(sequence, dtype=float)
    log_bound = (math.log(2 * C) + (1 - eta) / eta * math.log(b)) / eta
    bound = math.exp(log_bound) if log_bound < 709 else math.inf
    if len(Y) < 2 or np.any(Y < 0) or not np.all(np.isfinite(Y)):
        return InterpolationReport(False, bound, float(Y[0]) if len(Y) else math.nan, None, None,
                                   "not applicable: need a finite nonnegative sequence of length >= 2")
    n = np.arange(len(Y) - 1)
    with np.errstate(divide="ignore"):
        rhs = np.exp(math.log(C) + n * math.log(b)) * Y[1:] ** (1 - eta)
    if np.any(Y[:-1] > rhs * (1 + rtol)):
        bad = int(np.flatnonzero(Y[:-1] > rhs * (1 + rtol))[0])
        return InterpolationReport(False, bound, float(Y[0]), None, None,
                                   f"not applicable: hypothesis fails at n={bad}")
    y0 = float(Y[0])
    return InterpolationReport(True, bound, y0, y0 <= bound, (bound / y0) if y0 > 0 else math.inf)


def interpolation_sequence(C: float, b: float, eta: float, D: float, length: int = 60) -> np.ndarray:
    """Bounded sequence satisfying the interpolation hypothesis with equality.

    ``log Y_n = A + n log(b)/eta + D (1 - eta)^-n`` with ``D < 0``. The sequence
    stops at the first term that leaves the double range.
    """
    if not D < 0:
        raise ValueError("D must be negative for a bounded sequence")
    lb = math.log(b)
    A = math.log(C) / eta + (1 - eta) * lb / eta ** 2
    out = []
    for n in range(length):
        ly = A + n * lb / eta + D * (1 - eta) ** (-n)
        if ly < -700:
            break
        if ly > 709:
            break
        out.append(math.exp(ly))
    return np.array(out)


# ---------------------------------------------------------------------------
# elementary inequalities


def _alg1_ratio(a, b, p, q):
    m = (p + q - 2.0) / p
    num = np.abs(a ** m - b ** m) ** p
    d = a - b
    den = np.abs(d) ** (p - 2.0) * d * (a ** (q - 1.0) - b ** (q - 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def _alg2_ratio(a, b, p, q):
    m = (p + q - 2.0) / p
    num = (a + b) ** (q - 2.0) * np.abs(a - b) ** p
    den = np.abs(a ** m - b ** m) ** p
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def _liao_ratio(delta, eps, p):
    """Ratio for ``a = 1``, ``b = 1 - delta``; the smallest admissible constant is its sup."""
    with np.errstate(divide="ignore"):
        gain = -np.expm1(p * np.log1p(-delta)) - eps
    return np.maximum(gain, 0.0) * eps ** (p - 1.0) / delta ** p


def _sup_1d(fn, lo=-6.0, hi=6.0, n=10_000, extra=(), rng=None, n_random=100_000):
    la = np.linspace(lo, hi, n)
    vals = fn(10.0 ** la)
    cands = [np.nanmax(vals)]
    if rng is not None:
        rv = fn(10.0 ** rng.uniform(lo, hi, n_random))
        cands.append(np.nanmax(rv))
    k = int(np.nanargmax(vals))
    a0, a1 = la[max(k - 1, 0)], la[min(k + 1, n - 1)]
    if a1 > a0:
        res = optimize.minimize_scalar(lambda s: -float(fn(np.array(10.0 ** s))), bounds=(a0, a1),
                                       method="bounded", options={"xatol": 1e-12})
        cands.append(-res.fun)
    cands.extend(extra)
    return float(np.nanmax(cands))


@dataclass
class InequalityReport:
    p: float
    q: float
    samples: int
    gamma_alg1: float
    violations_alg1: int
    gamma_alg2: float | None
    violations_alg2: int | None
    young_violations: int
    gamma_liao: float
    violations_liao: int
    scale_invariance_dev: float

    @property
    def total_violations(self) -> int:
        return (self.violations_alg1 + (self.violations_alg2 or 0) + self.young_violations
                + self.violations_liao)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total_violations"] = self.total_violations
        return d


def algebraic_inequality_suite(p: float, q: float, sample_count: int = 100_000, seed: int = 0,
                               slack: float = 1e-9) -> InequalityReport:
    """Sup-search the best constants, then count violations on fresh samples."""
    if not 1 < p < 2:
        raise ValueError("p must lie in (1, 2)")
    if not q > 1:
        raise ValueError("q must be > 1")
    rng = np.random.default_rng(seed)
    m = (p + q - 2.0) / p

    # homogeneity: the ratios depend on a/b only
    a = 10.0 ** rng.uniform(-3, 3, 1000)
    b = 10.0 ** rng.uniform(-3, 3, 1000)
    r_ab = _alg1_ratio(a, b, p, q)
    r_1 = _alg1_ratio(a / b, np.ones_like(b), p, q)
    ok = np.isfinite(r_ab) & np.isfinite(r_1)
    dev = float(np.max(np.abs(r_ab[ok] - r_1[ok]) / r_1[ok]))

    def draw_pairs(n):
        a = 10.0 ** rng.uniform(-6, 6, n)
        b = 10.0 ** rng.uniform(-6, 6, n)
        return a, b

    # (i)
    g1 = _sup_1d(lambda x: _alg1_ratio(x, 1.0, p, q), extra=(1.0, m ** p / (q - 1.0)), rng=rng)
    g1 *= 1 + slack
    a, b = draw_pairs(sample_count)
    lhs = np.abs(a ** m - b ** m) ** p
    d = a - b
    rhs = np.abs(d) ** (p - 2.0) * d * (a ** (q - 1.0) - b ** (q - 1.0))
    v1 = int(np.count_nonzero(lhs > g1 * rhs * (1 + 1e-12)))

    # (ii)
    g2 = v2 = None
    if q >= 2:
        g2 = _sup_1d(lambda x: _alg2_ratio(x, 1.0, p, q), extra=(1.0, 2.0 ** (q - 2.0) / m ** p), rng=rng)
        g2 *= 1 + slack
        a, b = draw_pairs(sample_count)
        lhs = (a + b) ** (q - 2.0) * np.abs(a - b) ** p
        rhs = np.abs(a ** m - b ** m) ** p
        v2 = int(np.count_nonzero(lhs > g2 * rhs * (1 + 1e-12)))

    # sharp weighted Young
    a, b = draw_pairs(sample_count)
    eps = rng.uniform(0.0, 1.0, sample_count)
    eps = np.where(eps == 0, 0.5, eps)
    qc = q / (q - 1.0)
    lhs = a * b
    rhs = eps * a ** q + (q - 1.0) / q * (q * eps) ** (-1.0 / (q - 1.0)) * b ** qc
    vy = int(np.count_nonzero(lhs > rhs * (1 + 1e-12)))

    # consequence a^p - b^p <= eps a^p + gamma eps^(1-p) (a - b)^p for a >= b >= 0
    ld = np.linspace(-10, 0, 1200)[:-1]
    le = np.linspace(-10, 0, 600)[:-1]
    grid = _liao_ratio(10.0 ** ld[:, None], 10.0 ** le[None, :], p)
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    res = optimize.minimize(lambda z: -float(_liao_ratio(10.0 ** min(z[0], 0.0), 10.0 ** min(z[1], 0.0), p)),
                            x0=[ld[i], le[j]], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    gl = max(float(grid.max()), -res.fun, (p - 1.0) ** (p - 1.0), _liao_ratio(1.0, (p - 1.0) / p, p))
    gl *= 1 + slack
    a = 10.0 ** rng.uniform(-6, 6, sample_count)
    frac = rng.uniform(0.0, 1.0, sample_count)
    b = a * frac
    eps = rng.uniform(0.0, 1.0, sample_count)
    eps = np.where(eps == 0, 0.5, eps)
    lhs = a ** p - b ** p
    rhs = eps * a ** p + gl * eps ** (1.0 - p) * (a - b) ** p
    vl = int(np.count_nonzero(lhs > rhs * (1 + 1e-12)))
    return InequalityReport(p, q, sample_count, g1, v1, g2, v2, vy, gl, vl, dev)


# ---------------------------------------------------------------------------
# scaling symmetry


def scale_profile(profile: ExteriorProfile, k: float) -> ExteriorProfile:
    if profile.kind == "zero":
        return profile
    if profile.kind == "tabulated":
        return replace(profile, samples=tuple((y, k * g) for y, g in profile.samples))
    return replace(profile, c=k * profile.c)


def scaled_trajectory(traj: Trajectory, k: float) -> Trajectory:
    """``v(x, t) = k u(x, k^(p-2) t)``: values times k, times times ``k^(2-p)``."""
    if not k > 0:
        raise ValueError("k must be > 0")
    if traj.kernel is not None and traj.kernel.multiplier.time_dependent:
        raise ValueError("scaling symmetry needs a time-independent kernel")
    if k == 1:
        return traj
    f = k ** (2.0 - traj.p)
    snaps = tuple(GridFunction(s.domain, k * s.values, s.time * f) for s in traj.snapshots)
    ext = None if traj.extinction_time is None else traj.extinction_time * f
    return Trajectory(snaps, tuple(d * f for d in traj.dt_history), ext, traj.kernel,
                      scale_profile(traj.exterior, k), None, dict(traj.meta, scaled_by=k))


# ---------------------------------------------------------------------------
# Fourier check for the linear case


def symbol_constant(sigma: float) -> float:
    """``int_R (1 - cos z) |z|^-(1+sigma) dz``."""
    return math.pi / (special.gamma(1.0 + sigma) * math.sin(math.pi * sigma / 2.0))


def fourier_gaussian_apply(x: float, sigma: float) -> float:
    """Linear operator ``2 PV int (u(x) - u(y)) |x - y|^-(1+sigma) dy`` on ``exp(-x^2)``."""
    c = 2.0 * symbol_constant(sigma)
    f = lambda xi: c * xi ** sigma * math.sqrt(math.pi) * math.exp(-xi * xi / 4.0) * math.cos(x * xi)
    val, _ = integrate.quad(f, 0.0, np.inf, limit=400, epsabs=0.0, epsrel=1e-12)
    return val / math.pi
