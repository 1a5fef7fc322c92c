import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panelflow import plate as pl
from panelflow.checks import gradient_error, gradcheck_models, smooth_clamped
from panelflow.errors import ConfigurationError
from panelflow.plate import PlateDomain, PlateModel

DOM = PlateDomain(17, 17)

# clamped square plate, continuum fundamental eigenvalue (omega^2 with D = 1)
LAMBDA1_CONTINUUM = 35.9852 ** 2


def rand_clamped(rng, dom=DOM, n=None):
    shape = dom.shape if n is None else (n,) + dom.shape
    return pl.clamp(rng.standard_normal(shape))


def test_domain_validation():
    with pytest.raises(ConfigurationError):
        PlateDomain(3, 9)
    with pytest.raises(ConfigurationError):
        PlateDomain(9, 9, lx=-1.0)
    d = PlateDomain(9, 5, 2.0, 1.0)
    assert d.hx == pytest.approx(0.25) and d.hy == pytest.approx(0.25)
    assert d.diam == pytest.approx(np.sqrt(5.0))


def test_trapezoid_weights_integrate_constants():
    d = PlateDomain(9, 13, 2.0, 3.0)
    assert pl.l2_inner(np.ones(d.shape), np.ones(d.shape), d) == pytest.approx(6.0)


def test_biharmonic_symmetric_and_positive():
    rng = np.random.default_rng(0)
    for _ in range(20):
        u, w = rand_clamped(rng), rand_clamped(rng)
        lhs = pl.l2_inner(pl.biharmonic_apply(u, DOM), w, DOM)
        rhs = pl.l2_inner(u, pl.biharmonic_apply(w, DOM), DOM)
        scale = np.sqrt(pl.l2_inner(u, u, DOM) * pl.l2_inner(w, w, DOM))
        assert abs(lhs - rhs) <= 1e-12 * scale * np.max(np.abs(pl.biharmonic_matrix(DOM)))
        assert pl.l2_inner(pl.biharmonic_apply(u, DOM), u, DOM) > 0


def test_laplacian_norm_matches_biharmonic_pairing():
    rng = np.random.default_rng(1)
    u = rand_clamped(rng)
    a = pl.laplacian_norm_sq(u, DOM)
    b = pl.l2_inner(pl.biharmonic_apply(u, DOM), u, DOM)
    assert a == pytest.approx(b, rel=1e-12)


def test_biharmonic_matrix_matches_stencil():
    rng = np.random.default_rng(2)
    u = rand_clamped(rng)
    B = pl.biharmonic_matrix(DOM)
    assert np.allclose(B @ pl.interior(u).ravel(), pl.interior(pl.biharmonic_apply(u, DOM)).ravel(),
                       rtol=1e-12, atol=1e-9)


def test_biharmonic_second_order_on_polynomial_bubble():
    # u = x^2 (1-x)^2 y^2 (1-y)^2 is clamped; compare with the exact biharmonic in the interior
    errs = []
    for n in (17, 33):
        d = PlateDomain(n, n)
        X, Y = d.coords()
        p, q = X ** 2 * (1 - X) ** 2, Y ** 2 * (1 - Y) ** 2
        p2, q2 = 2 - 12 * X + 12 * X ** 2, 2 - 12 * Y + 12 * Y ** 2
        exact = 24 * q + 2 * p2 * q2 + 24 * p
        u = p * q
        err = pl.biharmonic_apply(u, d) - exact
        mid = (slice(n // 4, 3 * n // 4), slice(n // 4, 3 * n // 4))
        errs.append(np.max(np.abs(err[mid])))
    assert errs[0] / errs[1] > 3.5


def test_lambda1_golden_and_rayleigh():
    assert pl.lambda1(PlateDomain(33, 33)) == pytest.approx(1282.869115675662, rel=1e-8)
    rng = np.random.default_rng(3)
    lam = pl.lambda1(DOM)
    for _ in range(10):
        w = rand_clamped(rng)
        assert lam <= pl.laplacian_norm_sq(w, DOM) / pl.l2_inner(w, w, DOM) * (1 + 1e-12)


def test_lambda1_refinement():
    vals = [pl.lambda1(PlateDomain(n, n)) for n in (17, 33, 65)]
    assert abs(vals[2] - vals[1]) / vals[2] <= 0.01
    assert abs(vals[2] - LAMBDA1_CONTINUUM) / LAMBDA1_CONTINUUM < 0.005


def test_first_mode_is_eigenvector():
    v = pl.first_mode(DOM)
    lam = pl.lambda1(DOM)
    r = pl.biharmonic_apply(v, DOM) - lam * v
    assert np.max(np.abs(r)) <= 1e-6 * lam
    assert v.max() == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
def test_bracket_bilinear_symmetric(seed, a, b):
    rng = np.random.default_rng(seed)
    u, w, z = rand_clamped(rng), rand_clamped(rng), rand_clamped(rng)
    br = pl.vk_bracket
    assert np.allclose(br(u, w, DOM), br(w, u, DOM), rtol=1e-12, atol=1e-9)
    lhs = br(a * u + b * z, w, DOM)
    rhs = a * br(u, w, DOM) + b * br(z, w, DOM)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-6 * np.max(np.abs(rhs)) + 1e-9)


def test_bracket_symbol():
    # [x^2/2, y^2/2] = u_xx w_yy = 1 at interior nodes
    d = PlateDomain(9, 9)
    X, Y = d.coords()
    val = pl.bracket_pointwise(X ** 2 / 2, Y ** 2 / 2, d)
    assert np.allclose(pl.interior(val), 1.0)


def test_airy_residual():
    rng = np.random.default_rng(4)
    u = rand_clamped(rng)
    v = pl.airy_solve(u, DOM)
    res = pl.biharmonic_apply(v, DOM) + pl.vk_bracket(u, u, DOM)
    assert np.max(np.abs(pl.interior(res))) <= 1e-9 * np.max(np.abs(pl.vk_bracket(u, u, DOM)))
    assert np.all(v[0] == 0) and np.all(v[:, -1] == 0)


@pytest.mark.parametrize("name", ["kirchhoff", "vonkarman", "vonkarman_F0", "berger"])
def test_gradient_consistency(name):
    model = gradcheck_models(DOM)[name]
    rng = np.random.default_rng(5)
    for _ in range(4):
        u = smooth_clamped(DOM, rng, 1.0)
        w = smooth_clamped(DOM, rng, 1.0)
        assert gradient_error(model, u, w, DOM) <= 1e-4


def test_gradient_consistency_quadrature_primitive():
    # no closed-form primitive: F is obtained by adaptive quadrature
    model = PlateModel("kirchhoff", pointwise_law=lambda s: s ** 3 + np.sin(s))
    rng = np.random.default_rng(6)
    u, w = smooth_clamped(DOM, rng, 0.5), smooth_clamped(DOM, rng, 1.0)
    assert gradient_error(model, u, w, DOM) <= 1e-4


def test_potential_examples():
    z = DOM.zeros()
    assert pl.potential(PlateModel.vonkarman(), z, DOM) == 0.0
    rng = np.random.default_rng(7)
    u = smooth_clamped(DOM, rng)
    assert pl.potential(PlateModel.kirchhoff(), u, DOM) >= 0
    berger = PlateModel.berger(kappa=2.0, gamma_param=3.0)
    q = pl.grad_norm_sq(u, DOM)
    assert pl.potential(berger, u, DOM) == pytest.approx(0.5 * q ** 2 - 1.5 * q)


def test_model_validation():
    with pytest.raises(ConfigurationError):
        PlateModel("membrane")
    with pytest.raises(ConfigurationError):
        PlateModel.berger(kappa=0.0)
    with pytest.raises(ConfigurationError):
        pl.coercivity_margin(PlateModel(), DOM.zeros(), 0.5, 0.0, DOM)


def test_coercivity_examples():
    z = DOM.zeros()
    assert pl.coercivity_margin(PlateModel.vonkarman(), z, 0.0, 0.0, DOM) == 0.0
    rng = np.random.default_rng(8)
    berger = PlateModel.berger(kappa=1.0, gamma_param=10.0)
    eta, C = pl.coercivity_constants(berger, DOM)
    assert (eta, C) == (0.0, 25.0)
    for _ in range(50):
        u = smooth_clamped(DOM, rng, rng.uniform(0, 1))
        assert pl.coercivity_margin(berger, u, eta, C, DOM) >= -1e-12
        assert pl.coercivity_margin(PlateModel.kirchhoff(), u, 0.3, 0.0, DOM) >= 0


def test_max_principle_margin_basics():
    z = DOM.zeros()
    assert pl.max_principle_margin(z, DOM) == 0.0
    rng = np.random.default_rng(9)
    u = smooth_clamped(DOM, rng)
    m = pl.max_principle_margin(u, DOM)
    assert pl.max_principle_margin(-2.5 * u, DOM) == pytest.approx(2.5 * m, rel=1e-12)


def test_dx_zero_extended_support_and_skew():
    rng = np.random.default_rng(10)
    u = rand_clamped(rng)
    g = rng.standard_normal(DOM.shape)
    ux = pl.dx_zero_extended(u, DOM)
    # summation by parts against the same zero-extended difference of g
    gx = pl.dx_zero_extended(g, DOM)
    assert np.sum(ux * g) == pytest.approx(-np.sum(u * gx), rel=1e-12, abs=1e-12)
    assert np.all(ux[:, 0] == 0) and np.all(ux[:, -1] == 0)
