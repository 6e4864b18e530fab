"""Time stepping for u_t + L u = 0: explicit Euler and proximal (implicit) Euler."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import linalg

from .grid import Domain, GridFunction
from .kernel import ExteriorProfile, KernelSpec
from .operator import OperatorContext, build_context

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonParams:
    max_iter: int = 60
    grad_tol: float = 1e-10
    stage_tol: float = 1e-4
    eps_schedule: tuple = (1e-3, 1e-5, 1e-8)
    armijo: float = 1e-4
    easy_iterations: int = 12

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("newton.max_iter must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("newton.grad_tol must be > 0")
        sched = tuple(float(e) for e in self.eps_schedule)
        if not sched or any(e <= 0 for e in sched):
            raise ValueError("newton.eps_schedule must be a non-empty list of positive numbers")
        object.__setattr__(self, "eps_schedule", sched)


@dataclass(frozen=True)
class SteppingPolicy:
    """Step-size policy.

    ``eps_schedule`` entries and the accuracy target ``max_rel_change`` are
    relative to the current state's sup norm, so the whole policy commutes
    with the amplitude scaling ``u -> k u``, ``t -> k^(2-p) t``.
    """

    mode: str = "implicit_proximal"
    dt_init: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = math.inf
    safety: float = 0.9
    growth: float = 1.2
    max_rel_change: float = 0.05
    snapshot_every: int = 1
    dense_threshold: float = 0.1
    extinction_tol: float = 1e-6
    newton: NewtonParams = field(default_factory=NewtonParams)

    def __post_init__(self):
        if self.mode not in ("explicit_adaptive", "implicit_proximal"):
            raise ValueError(f"unknown stepping mode {self.mode!r}")
        if not (self.dt_init > 0 and self.dt_min > 0):
            raise ValueError("dt_init and dt_min must be > 0")
        if self.dt_min > self.dt_init:
            raise ValueError(f"need dt_min <= dt_init, got {self.dt_min} > {self.dt_init}")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if not 0 < self.extinction_tol <= 1e-4:
            raise ValueError(f"extinction_tol must lie in (0, 1e-4], got {self.extinction_tol}")
        if not self.max_rel_change > 0:
            raise ValueError("max_rel_change must be > 0")

    def scaled_time(self, factor: float) -> "SteppingPolicy":
        from dataclasses import replace
        return replace(self, dt_init=self.dt_init * factor, dt_min=self.dt_min * factor,
                       dt_max=self.dt_max * factor)


@dataclass(frozen=True)
class Trajectory:
    snapshots: tuple
    dt_history: tuple = ()
    extinction_time: float | None = None
    kernel: KernelSpec | None = None
    exterior: ExteriorProfile = field(default_factory=ExteriorProfile)
    problem: Any = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if not snaps:
            raise ValueError("trajectory has no snapshots")
        times = np.array([s.time for s in snaps])
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "dt_history", tuple(float(d) for d in self.dt_history))

    @property
    def domain(self) -> Domain:
        return self.snapshots[0].domain

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def values(self) -> np.ndarray:
        return np.stack([s.values for s in self.snapshots])

    @property
    def sup_abs(self) -> np.ndarray:
        return np.array([float(np.max(np.abs(s.values))) for s in self.snapshots])

    @property
    def p(self) -> float:
        if self.kernel is None:
            raise ValueError("trajectory carries no kernel spec; pass p explicitly")
        return self.kernel.p

    def window(self, t1: float, t2: float) -> np.ndarray:
        """Indices of snapshots with ``t1 <= time <= t2`` (relative slack 1e-12)."""
        times = self.times
        slack = 1e-12 * max(1.0, abs(t2))
        if t1 < times[0] - slack or t2 > times[-1] + slack:
            raise ValueError(f"window [{t1}, {t2}] outside trajectory span [{times[0]}, {times[-1]}]")
        return np.flatnonzero((times >= t1 - slack) & (times <= t2 + slack))

    def is_globally_nonnegative(self, tol: float = 1e-12) -> bool:
        scale = max(1e-300, float(self.sup_abs.max()))
        return bool(self.values.min() >= -tol * scale) and self.exterior.is_nonnegative()


class StepFailure(RuntimeError):
    """Raised when the step size underflows; ``trajectory`` keeps the last good state."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual: float
    reference_residual: float
    stages: list = field(default_factory=list)
    reason: str = ""


# ---------------------------------------------------------------------------
# single steps


def step_explicit(u: np.ndarray, ctx: OperatorContext, dt: float, t: float = 0.0) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    return np.asarray(u, dtype=float) - dt * ctx.apply_values(u, t, eps=0.0)


def _solve_spd(J, rhs):
    try:
        return linalg.cho_solve(linalg.cho_factor(J, check_finite=False), rhs, check_finite=False)
    except linalg.LinAlgError:
        return np.linalg.solve(J, rhs)


def _newton_stages(u, ctx, dt, t, newton, schedule, scale, target, stage_target, R0, h):
    def objective(v, eps):
        return 0.5 / dt * float(np.sum((v - u) ** 2)) + ctx.energy(v, t, eps) / h

    v = u.copy()
    total = 0
    stages = []
    res = math.inf
    last = len(schedule) - 1
    for k, eps_rel in enumerate(schedule):
        eps = max(eps_rel * scale, np.finfo(float).tiny)
        goal = target if k == last else stage_target
        it = 0
        r = (v - u) / dt + ctx.apply_values(v, t, eps)
        res = float(np.max(np.abs(r)))
        while res > goal:
            if it >= newton.max_iter:
                return v, NewtonReport(False, total, res, R0, stages,
                                       f"no convergence at eps={eps:.3g} after {it} iterations")
            J = ctx.jacobian(v, t, eps)
            J[np.diag_indices_from(J)] += 1.0 / dt
            # rounding in v_i - v_j reaches the residual through J; nothing below that is resolvable
            if res <= 64.0 * np.finfo(float).eps * scale * float(np.max(np.abs(J).sum(axis=1))):
                break
            delta = -_solve_spd(J, r)
            f0 = objective(v, eps)
            slope = float(r @ delta)
            accepted = False
            if -slope > 64.0 * np.finfo(float).eps * max(abs(f0), 1e-300):
                alpha = 1.0
                for _ in range(40):
                    trial = v + alpha * delta
                    if objective(trial, eps) <= f0 + newton.armijo * alpha * slope:
                        accepted = True
                        break
                    alpha *= 0.5
            if accepted:
                r_trial = (trial - u) / dt + ctx.apply_values(trial, t, eps)
                res_trial = float(np.max(np.abs(r_trial)))
            else:
                # predicted decrease is below the objective's rounding: backtrack on the residual
                alpha = 1.0
                for _ in range(30):
                    trial = v + alpha * delta
                    r_trial = (trial - u) / dt + ctx.apply_values(trial, t, eps)
                    res_trial = float(np.max(np.abs(r_trial)))
                    if res_trial < res:
                        break
                    alpha *= 0.5
                else:
                    return v, NewtonReport(False, total, res, R0, stages, "line search failed")
            v, r, res = trial, r_trial, res_trial
            it += 1
            total += 1
        stages.append({"eps": eps, "iterations": it, "residual": res})

    return v, NewtonReport(True, total, res, R0, stages)


def step_implicit(u: np.ndarray, ctx: OperatorContext, dt: float, t: float = 0.0,
                  newton: NewtonParams | None = None) -> tuple[np.ndarray, NewtonReport]:
    """One proximal step ``argmin_v (1/2dt) sum h (v - u)^2 + E(v)`` at time ``t``.

    Damped Newton with Armijo backtracking on the proximal objective. The
    solve first targets the final regularization in ``eps_schedule`` (scaled by
    the state's magnitude) starting from ``u``; if that stalls it restarts and
    continues through the whole schedule.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    newton = newton or NewtonParams()
    u = np.asarray(u, dtype=float)
    h = ctx.domain.cell_measure
    ext_scale = 0.0 if ctx.exterior is None else float(np.max(np.abs(ctx.exterior.g)))
    scale = max(float(np.max(np.abs(u))), ext_scale)
    if scale == 0.0:
        return u.copy(), NewtonReport(True, 0, 0.0, 0.0)

    eps0 = max(newton.eps_schedule[0] * scale, np.finfo(float).tiny)
    R0 = float(np.max(np.abs(ctx.apply_values(u, t, eps0))))
    if R0 == 0.0:
        return u.copy(), NewtonReport(True, 0, 0.0, 0.0)
    # the (v - u)/dt term alone cannot be resolved below a few ulps of scale/dt
    floor = 64.0 * np.finfo(float).eps * (scale / dt + R0)
    target = max(newton.grad_tol * R0, floor)
    stage_target = max(newton.stage_tol * R0, target)

    # Warm start directly at the final regularization; continuation is the fallback.
    total = 0
    for schedule in ((newton.eps_schedule[-1],), newton.eps_schedule):
        v, rep = _newton_stages(u, ctx, dt, t, newton, schedule, scale, target, stage_target, R0, h)
        total += rep.iterations
        if rep.converged or len(newton.eps_schedule) == 1:
            break
    rep = NewtonReport(rep.converged, total, rep.residual, R0, rep.stages, rep.reason)
    if not rep.converged:
        return v, rep
    res, stages = rep.residual, rep.stages

    eps_f = max(newton.eps_schedule[-1] * scale, np.finfo(float).tiny)
    e_new, e_old = ctx.energy(v, t, eps_f), ctx.energy(u, t, eps_f)
    e_tol = 1e-10 * max(abs(e_old), 1e-300) + 64.0 * np.finfo(float).eps * abs(e_old)
    if e_new > e_old + e_tol:
        return v, NewtonReport(False, total, res, R0, stages, "energy increased")
    if ctx.exterior is None or ctx.exterior.is_zero:
        if float(np.sum(v * v)) > float(np.sum(u * u)) * (1 + 1e-10):
            return v, NewtonReport(False, total, res, R0, stages, "L2 norm increased")
    return v, NewtonReport(True, total, res, R0, stages)


# ---------------------------------------------------------------------------
# extinction


def detect_extinction(times, sups, tol: float, p: float) -> float | None:
    """First time ``sup|u| <= tol * sup|u0|``, refined with ``sup^(2-p)`` linear in time.

    The model line through the last two snapshots above the threshold is
    extrapolated to zero and clipped to the bracketing interval.
    """
    times = np.asarray(times, dtype=float)
    sups = np.asarray(sups, dtype=float)
    if sups[0] == 0.0:
        return float(times[0])
    thr = tol * sups[0]
    below = np.flatnonzero(sups <= thr)
    if len(below) == 0:
        return None
    b = int(below[0])
    a = b - 1
    y = sups ** (2.0 - p)
    if a >= 1 and y[a - 1] > y[a]:
        t_zero = times[a] + (times[a] - times[a - 1]) * y[a] / (y[a - 1] - y[a])
    elif y[a] > y[b]:
        t_zero = times[a] + (times[b] - times[a]) * y[a] / (y[a] - y[b])
    else:
        t_zero = times[b]
    return float(min(max(t_zero, times[a]), times[b]))


def detect_extinction_traj(traj: Trajectory, tol: float | None = None) -> float | None:
    if tol is None:
        tol = traj.meta.get("extinction_tol", 1e-6)
    return detect_extinction(traj.times, traj.sup_abs, tol, traj.p)


# ---------------------------------------------------------------------------
# driver


def simulate(problem, ctx: OperatorContext | None = None,
             dt_schedule: Sequence[float] | None = None) -> Trajectory:
    """Integrate to ``problem.T`` or until extinction.

    ``problem`` provides ``domain``, ``kernel``, ``exterior``, ``T``,
    ``stepping`` and ``initial_values()``. A fixed ``dt_schedule`` disables
    step-size adaptation (used for exact scaling comparisons).
    """
    dom = problem.domain
    dom.require_1d()
    pol: SteppingPolicy = problem.stepping
    if ctx is None:
        ctx = build_context(dom, problem.kernel, problem.exterior)
    u0 = np.asarray(problem.initial_values(), dtype=float)
    if getattr(problem, "nonnegative", False) and np.any(u0 < 0):
        raise ValueError("initial datum has negative values but nonnegativity was requested")
    p = problem.kernel.p
    S0 = float(np.max(np.abs(u0)))
    snaps = [GridFunction(dom, u0, 0.0)]
    dts: list[float] = []
    meta = {"extinction_tol": pol.extinction_tol, "mode": pol.mode, "rejected_steps": 0,
            "newton_iterations": 0, "min_value": float(u0.min())}

    def finish(ext_time):
        return Trajectory(tuple(snaps), tuple(dts), ext_time, problem.kernel, problem.exterior,
                          problem, meta)

    if S0 == 0.0 and ctx.exterior is not None and ctx.exterior.is_zero:
        return finish(0.0)

    implicit = pol.mode == "implicit_proximal"
    zero_ext = ctx.exterior is None or ctx.exterior.is_zero
    t, u, dt = 0.0, u0, pol.dt_init
    n = 0
    sched = list(dt_schedule) if dt_schedule is not None else None
    T = problem.T
    extinct = None
    while True:
        if sched is not None:
            if n >= len(sched):
                break
            dt = sched[n]
        else:
            if t >= T * (1 - 1e-14):
                break
            dt = min(dt, pol.dt_max, T - t)
        t_new = t + dt
        if implicit:
            v, rep = step_implicit(u, ctx, dt, t_new, pol.newton)
            ok, why = rep.converged, rep.reason
            meta["newton_iterations"] += rep.iterations
            easy = rep.iterations <= pol.newton.easy_iterations * len(pol.newton.eps_schedule)
        else:
            v = step_explicit(u, ctx, dt, t)
            sup_u, sup_v = float(np.max(u)), float(np.max(v))
            ok = not (zero_ext and sup_v > sup_u + 1e-12 * max(1.0, sup_u))
            ok = ok and bool(np.all(np.isfinite(v)))
            why = "maximum principle violated"
            easy = True
        scale = max(float(np.max(np.abs(u))), 1e-300)
        change = float(np.max(np.abs(v - u))) / scale
        if sched is None:
            if ok and change > pol.max_rel_change:
                ok, why = False, f"relative change {change:.3g} above {pol.max_rel_change}"
            if not ok:
                meta["rejected_steps"] += 1
                log.debug("reject t=%.6g dt=%.3g: %s", t, dt, why)
                shrink = 0.5
                if math.isfinite(change) and change > pol.max_rel_change:
                    shrink = min(0.5, max(0.1, pol.safety * pol.max_rel_change / change))
                dt *= shrink
                if dt < pol.dt_min:
                    raise StepFailure(f"step size underflow at t={t:.6g}: {why}", finish(None))
                continue
        elif not ok:
            raise StepFailure(f"prescribed step {n} failed at t={t:.6g}: {why}", finish(None))
        t, u = t_new, v
        n += 1
        dts.append(dt)
        meta["min_value"] = min(meta["min_value"], float(u.min()))
        sup = float(np.max(np.abs(u)))
        done_ext = zero_ext and sup <= pol.extinction_tol * S0
        last = done_ext or (sched is not None and n >= len(sched)) or (sched is None and t >= T * (1 - 1e-14))
        if last or n % pol.snapshot_every == 0 or sup <= pol.dense_threshold * S0:
            snaps.append(GridFunction(dom, u, t))
        if done_ext:
            extinct = detect_extinction([s.time for s in snaps],
                                        [float(np.max(np.abs(s.values))) for s in snaps],
                                        pol.extinction_tol, p)
            break
        if sched is None:
            grow = pol.growth if easy else 1.0
            ratio = pol.safety * pol.max_rel_change / max(change, 1e-300)
            dt = dt * min(grow, max(ratio, 0.5))
    return finish(extinct)
