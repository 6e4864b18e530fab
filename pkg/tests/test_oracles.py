import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracflow.grid import GridFunction, build_domain
from fracflow.kernel import ExteriorProfile, KernelSpec
from fracflow.oracles import (MollifierParams, OdeEnvelope, algebraic_inequality_suite,
                              check_fast_convergence, check_interpolation, check_ode_comparison,
                              interpolation_sequence, mollifier_identity_residual, mollify,
                              mollify_values, ode_envelope_eval, ode_exponent, scaled_trajectory,
                              symbol_constant)
from fracflow.stepper import Trajectory

dom = build_domain(-1, 1, 16)


def test_ode_envelope_values():
    env = OdeEnvelope(1.0, 1.0, 0.5)
    assert env.extinction_time == 2.0
    assert ode_envelope_eval(env, 1.0) == pytest.approx(0.25, rel=1e-15)
    assert env(3.0) == 0.0
    assert not OdeEnvelope(0.0, 1.0, 0.5)(np.linspace(0, 5, 7)).any()
    assert ode_exponent(1.2, 8 / 3) == pytest.approx(0.7)
    assert ode_exponent(1.6, 2.0) == pytest.approx(0.8)
    for bad in (0.0, 1.0, 1.3):
        with pytest.raises(ValueError):
            OdeEnvelope(1.0, 1.0, bad)
    with pytest.raises(ValueError):
        env(-1.0)


@settings(max_examples=30)
@given(st.floats(0.1, 10), st.floats(0.1, 5), st.floats(0.05, 0.95))
def test_envelope_solves_the_ode(U0, c, alpha):
    env = OdeEnvelope(U0, c, alpha)
    t = np.linspace(0.05, 0.9, 12) * env.extinction_time
    h = 1e-6 * env.extinction_time
    deriv = (env(t + h) - env(t - h)) / (2 * h)
    resid = deriv + c * env(t) ** alpha
    assert np.max(np.abs(resid)) <= 1e-6 * max(c * U0 ** alpha, 1.0)


def _uniform_traj(amplitude, times, kernel):
    snaps = tuple(GridFunction(dom, np.full(dom.M, amplitude(t)), t) for t in times)
    return Trajectory(snaps, kernel=kernel)


@pytest.mark.parametrize("p,s,q", [(1.6, 0.5, 2.0), (1.2, 0.25, 8 / 3)])
def test_ode_comparison_recovers_synthetic_constant(p, s, q):
    # U = ||u||_q^q = (1 - t/2)^(q/(2-p)) on a domain of length 2
    amp = lambda t: ((1 - t / 2) ** (q / (2 - p)) / 2) ** (1 / q)
    rep = check_ode_comparison(_uniform_traj(amp, np.linspace(0, 1.9, 40), KernelSpec(p, s)))
    alpha = ode_exponent(p, q)
    assert rep.q == pytest.approx(q)
    assert rep.c_obs == pytest.approx(0.5 / (1 - alpha), rel=1e-6)
    assert rep.passed and rep.max_envelope_ratio == pytest.approx(1.0, abs=1e-9)


def test_ode_comparison_zero_data_and_growth():
    z = _uniform_traj(lambda t: 0.0, [0.0, 1.0], KernelSpec(1.5, 0.5))
    assert check_ode_comparison(z).passed
    g = _uniform_traj(lambda t: 1 + t, [0.0, 1.0, 2.0], KernelSpec(1.5, 0.5))
    rep = check_ode_comparison(g)
    assert not rep.passed and not rep.monotone


@settings(max_examples=30)
@given(st.floats(-5, 5), st.floats(0.01, 0.9), st.sampled_from(["uniform", "random"]))
def test_mollifier_of_constant(c, h, kind):
    rng = np.random.default_rng(1)
    t = np.linspace(0, 2, 41) if kind == "uniform" else np.concatenate([[0], np.sort(rng.uniform(0, 2, 30))])
    vh = mollify_values(t, np.full_like(t, c), MollifierParams(h))
    assert np.allclose(vh, c * -np.expm1(-t / h), rtol=0, atol=1e-12 * max(abs(c), 1))
    assert not mollify_values(t, np.zeros_like(t), MollifierParams(h)).any()


def test_mollifier_exact_for_linear_data():
    t = np.linspace(0, 1, 11)
    h = 0.2
    vh = mollify_values(t, t, MollifierParams(h))
    # int_0^t tau/h e^{(tau-t)/h} dtau = t - h (1 - e^{-t/h})
    assert np.allclose(vh, t - h * -np.expm1(-t / h), atol=1e-14)


def test_backward_mollifier_of_constant():
    t = np.linspace(0, 2, 21)
    vh = mollify_values(t, np.full_like(t, 3.0), MollifierParams(0.3, "backward"))
    assert np.allclose(vh, 3 * -np.expm1(-(2 - t) / 0.3), atol=1e-12)


def test_identity_residual_second_order():
    v = lambda t: np.sin(3 * t) + t ** 2
    errs = []
    ns = (41, 81, 161, 321)
    for n in ns:
        t = np.linspace(0, 1, n)
        errs.append(mollifier_identity_residual(t, v(t), MollifierParams(0.1)))
    order = -np.polyfit(np.log(1 / (np.array(ns) - 1)), np.log(errs), 1)[0]
    assert -order >= 1.9


def test_mollifier_contraction_and_convergence():
    t = np.linspace(0, 1, 2001)
    v = 1 + np.sin(8 * t) ** 2
    l1 = []
    for h in (0.1, 0.01, 0.001):
        vh = mollify_values(t, v, MollifierParams(h))
        assert vh.min() >= 0 and vh.max() <= v.max() + 1e-12
        l1.append(np.trapezoid(np.abs(vh - v)[t >= 0.2], t[t >= 0.2]))
    assert l1[0] > l1[1] > l1[2]


def test_mollify_trajectory_wrapper():
    times = np.linspace(0, 1, 5)
    traj = _uniform_traj(lambda t: 2.0, times, KernelSpec(1.5, 0.5))
    out = mollify(traj, MollifierParams(0.1))
    assert np.allclose(out.values[:, 0], 2 * -np.expm1(-times / 0.1))
    assert "mollifier_warning" in mollify(traj, MollifierParams(0.2)).meta
    with pytest.raises(ValueError, match="three"):
        mollify(_uniform_traj(lambda t: 1.0, [0.0, 1.0], KernelSpec(1.5, 0.5)), MollifierParams(0.1))


def test_fast_convergence_threshold_example():
    rep = check_fast_convergence(2.0, 2.0, 1.0, 0.25)
    assert rep.threshold == pytest.approx(0.25)
    assert rep.hypothesis_met and rep.converged
    assert rep.first_terms[:3] == pytest.approx([0.25, 1 / 8, 1 / 16], rel=1e-12)
    zero = check_fast_convergence(2.0, 2.0, 1.0, 0.0)
    assert zero.converged and zero.first_terms == [0.0, 0.0, 0.0]
    above = check_fast_convergence(2.0, 2.0, 1.0, 2.5)
    assert not above.hypothesis_met and above.implication_holds
    assert above.note == "hypothesis unmet, no prediction"


@settings(max_examples=40)
@given(st.floats(1.01, 50), st.floats(1.01, 20), st.floats(0.05, 3), st.floats(0.0, 1.0))
def test_fast_convergence_implication(C, b, eta, frac):
    thr = C ** (-1 / eta) * b ** (-1 / eta ** 2)
    rep = check_fast_convergence(C, b, eta, frac * thr)
    assert rep.implication_holds and rep.converged


def test_interpolation_constant_and_zero():
    C, b, eta = 3.0, 2.0, 0.5
    Y = C ** (1 / eta)
    rep = check_interpolation(C, b, eta, [Y] * 10)
    assert rep.applicable and rep.holds and rep.bound >= Y
    z = check_interpolation(C, b, eta, np.zeros(5))
    assert z.applicable and z.holds
    bad = check_interpolation(C, b, eta, [100.0, 1e-9])
    assert not bad.applicable and "hypothesis fails" in bad.note


@settings(max_examples=40)
@given(st.floats(0.5, 20), st.floats(1.1, 10), st.floats(0.1, 0.9), st.floats(-5, -0.01))
def test_interpolation_on_extremal_sequences(C, b, eta, D):
    Y = interpolation_sequence(C, b, eta, D)
    if len(Y) < 2:
        return
    rep = check_interpolation(C, b, eta, Y)
    assert rep.applicable and rep.holds
    assert rep.slack >= 2 ** (1 / eta) * (1 - 1e-9)


def test_sharp_young_equality_case():
    a = b = 1.0
    eps, q = 0.5, 2.0
    rhs = eps * a ** q + (q - 1) / q * (q * eps) ** (-1 / (q - 1)) * b ** 2
    assert rhs == pytest.approx(a * b, rel=1e-15)


@pytest.mark.parametrize("p,q", [(1.5, 2.0), (1.2, 8 / 3), (1.8, 1.5)])
def test_inequality_suite_has_no_violations(p, q):
    rep = algebraic_inequality_suite(p, q, sample_count=20_000, seed=3)
    assert rep.total_violations == 0
    assert rep.scale_invariance_dev < 1e-10
    assert rep.gamma_alg1 >= 1.0 and rep.gamma_liao >= (p - 1) ** (p - 1)
    assert (rep.gamma_alg2 is None) == (q < 2)


def test_scaled_trajectory_group():
    spec = KernelSpec(1.5, 0.5)
    snaps = tuple(GridFunction(dom, (1 - t) * np.cos(dom.centers), t) for t in (0.0, 0.5, 1.0))
    traj = Trajectory(snaps, (0.5, 0.5), 1.0, spec, ExteriorProfile("constant", c=0.1))
    assert scaled_trajectory(traj, 1.0) is traj
    two = scaled_trajectory(traj, 2.0)
    assert two.times[-1] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert two.exterior.c == pytest.approx(0.2)
    back = scaled_trajectory(two, 0.5)
    assert np.allclose(back.values, traj.values, rtol=1e-15, atol=0)
    assert np.allclose(back.times, traj.times, rtol=1e-15, atol=0)
    with pytest.raises(ValueError):
        scaled_trajectory(traj, 0.0)


def test_symbol_constant_at_one():
    assert symbol_constant(1.0) == pytest.approx(math.pi)


def test_identity_residual_time_window():
    t = np.linspace(0, 1, 101)
    v = np.sqrt(t)
    full = mollifier_identity_residual(t, v, MollifierParams(0.1))
    late = mollifier_identity_residual(t, v, MollifierParams(0.1), t_min=0.2)
    assert late < full
    with pytest.raises(ValueError):
        mollifier_identity_residual(t, v, MollifierParams(0.1), t_min=2.0)
