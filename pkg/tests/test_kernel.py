import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fracflow.grid import build_domain
from fracflow.kernel import (ExteriorProfile, KernelSpec, assemble_weights, cached_weights, cell_integrals,
                             check_exterior_admissible, checkerboard, constant, exterior_coefficients,
                             exterior_mass_closed_form, load_weights, save_weights, time_modulated,
                             validate_kernel)

ps_values = st.tuples(st.floats(1.05, 1.95), st.floats(0.05, 0.95))


def test_adjacent_cell_integral_closed_form():
    I = cell_integrals(build_domain(0, 8, 8), 0.75)
    expected = (0.5 ** -0.75 - 1.5 ** -0.75) / 0.75
    assert I[3, 4] == pytest.approx(expected, rel=1e-14)
    assert I[3, 4] == pytest.approx(1.2586731787207306, rel=1e-12)
    quad = integrate.quad(lambda z: z ** -1.75, 0.5, 1.5)[0]
    assert I[3, 4] == pytest.approx(quad, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(ps_values)
def test_far_weights_bracketed_by_endpoint_values(ps):
    p, s = ps
    sig = p * s
    d = build_domain(-1, 1, 32)
    W = assemble_weights(d, KernelSpec(p, s)).W
    x = d.centers
    i, j = np.triu_indices(d.M, k=2)
    r = np.abs(x[i] - x[j])
    kappa = d.h / (2 * r)
    scaled = W[i, j] * r ** (1 + sig) / d.h
    assert np.all(scaled >= (1 + kappa) ** (-(1 + sig)) * (1 - 1e-12))
    assert np.all(scaled <= (1 - kappa) ** (-(1 + sig)) * (1 + 1e-12))


def test_cell_integral_matches_fine_quadrature():
    d = build_domain(-1, 1, 16)
    I = cell_integrals(d, 0.9)
    x = d.centers
    for j in (2, 7, 15):
        lo, hi = d.a + j * d.h, d.a + (j + 1) * d.h
        ref = integrate.quad(lambda y: abs(x[0] - y) ** -1.9, lo, hi, epsrel=1e-12)[0]
        assert I[0, j] == pytest.approx(ref, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(ps_values, st.floats(0.5, 3.0), st.floats(0.05, 0.7))
def test_weights_symmetric(ps, c2, period):
    p, s = ps
    spec = KernelSpec(p, s, 1.0, max(c2, 1.0), checkerboard(1.0, max(c2, 1.0), period))
    W = assemble_weights(build_domain(-1, 1, 32), spec).W
    assert np.array_equal(W, W.T)
    assert np.all(np.diag(W) == 0)


def test_checkerboard_degenerates_to_constant():
    d = build_domain(-1, 1, 16)
    a = assemble_weights(d, KernelSpec(1.5, 0.5, 2.0, 2.0, checkerboard(2.0, 2.0, 0.3))).W
    b = assemble_weights(d, KernelSpec(1.5, 0.5, 2.0, 2.0, constant(2.0))).W
    assert np.allclose(a, b, rtol=1e-14, atol=0)


def test_validate_kernel():
    assert validate_kernel(KernelSpec(1.5, 0.5, 1, 1, constant(1))).passed
    bad = validate_kernel(KernelSpec(1.5, 0.5, 1, 2, constant(3)))
    assert not bad.passed and bad.bound_violations > 0
    assert validate_kernel(KernelSpec(1.5, 0.5, 1, 2, time_modulated(1, 2, 3.0))).passed


def test_kernel_spec_rejects_out_of_range():
    with pytest.raises(ValueError, match=r"\(1, 2\)"):
        KernelSpec(2.5, 0.5)
    with pytest.raises(ValueError):
        KernelSpec(1.5, 1.0)


def test_exterior_mass_closed_form():
    d = build_domain(-1, 1, 16)
    e0 = exterior_mass_closed_form(d, 0.75, x=np.array([0.0]))
    assert e0[0] == pytest.approx(2 / 0.75, rel=1e-14)
    xi = d.centers[5]
    ref = (integrate.quad(lambda y: (y - xi) ** -1.75, 1, np.inf)[0]
           + integrate.quad(lambda y: (xi - y) ** -1.75, -np.inf, -1)[0])
    assert exterior_coefficients(d, KernelSpec(1.5, 0.5)).E0[5] == pytest.approx(ref, rel=1e-9)


def test_tabulated_zero_profile_matches_zero_kind():
    from fracflow.operator import build_context
    d = build_domain(-1, 1, 16)
    spec = KernelSpec(1.5, 0.5)
    u = np.cos(d.centers) + 0.3
    a = build_context(d, spec).apply_values(u)
    b = build_context(d, spec, ExteriorProfile("tabulated", samples=((-5.0, 0.0), (5.0, 0.0)))).apply_values(u)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_panel_quadrature_reproduces_constant_exterior():
    d = build_domain(-1, 1, 16)
    spec = KernelSpec(1.5, 0.5)
    tab = exterior_coefficients(d, spec, ExteriorProfile("tabulated", samples=((-3.0, 1.0), (3.0, 1.0))))
    closed = exterior_mass_closed_form(d, spec.sigma)
    assert np.allclose(tab.E0, closed, rtol=1e-6)


def test_exterior_admissibility():
    d = build_domain(-1, 1, 16)
    spec = KernelSpec(1.5, 0.5)
    assert check_exterior_admissible(ExteriorProfile("power_decay", c=1.0, beta=1.0), d, spec) > 0
    with pytest.raises(ValueError, match="inadmissible"):
        check_exterior_admissible(ExteriorProfile("power_decay", c=1.0, beta=2.0), d, spec)


def test_weight_cache_round_trip(tmp_path, monkeypatch):
    d = build_domain(-1, 1, 16)
    spec = KernelSpec(1.4, 0.3)
    kw = assemble_weights(d, spec)
    save_weights(tmp_path / "w.kw", kw)
    assert np.array_equal(load_weights(tmp_path / "w.kw", d, spec).W, kw.W)
    with pytest.raises(ValueError, match="does not match"):
        load_weights(tmp_path / "w.kw", d, KernelSpec(1.4, 0.31))
    monkeypatch.setenv("FRACFLOW_CACHE", str(tmp_path / "cache"))
    first = cached_weights(d, spec)
    assert len(list((tmp_path / "cache").iterdir())) == 1
    assert np.array_equal(cached_weights(d, spec).W, first.W)


def test_coarse_grid_warning():
    with pytest.warns(RuntimeWarning, match="under-resolved"):
        assemble_weights(build_domain(-1, 1, 16), KernelSpec(1.9, 0.9))
