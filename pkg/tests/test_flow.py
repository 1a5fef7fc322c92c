import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panelflow import flow as fl
from panelflow.errors import ConfigurationError
from panelflow.flow import FlowDomain, FlowParams, FlowState
from panelflow.plate import PlateDomain

PD = PlateDomain(9, 9)
FD = FlowDomain.around(PD, 24, 24, 12, sponge_width=4)


def rand_state(rng, fd=FD):
    return FlowState(rng.standard_normal(fd.shape), rng.standard_normal(fd.shape))


def test_domain_placement_and_validation():
    assert FD.hx == PD.hx and FD.hz == PD.hx
    assert FD.Lx == pytest.approx(1.5) and FD.Lz == pytest.approx(1.5)
    X, Y = FD.face_coords()
    ox, oy = FD.plate_origin
    assert X[FD.i0, 0] == pytest.approx(ox) and Y[0, FD.j0] == pytest.approx(oy)
    with pytest.raises(ConfigurationError):
        FlowDomain.around(PD, 12, 24, 12, sponge_width=4)       # plate touches the sponge
    with pytest.raises(ConfigurationError):
        FlowDomain(24, 24, 12, 0.1, 0.125, 0.125, PD, 8, 8)       # spacing mismatch
    with pytest.raises(ConfigurationError):
        FlowParams(U=1.0)
    with pytest.raises(ConfigurationError):
        FlowParams(mu=-1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_laplacian_is_minus_stiffness(seed):
    # -<Lap a, b>_W = <grad a, grad b> with homogeneous Neumann data
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(FD.shape), rng.standard_normal(FD.shape)
    lhs = -fl.flow_inner(fl.laplacian(a, FD), b, FD)
    assert lhs == pytest.approx(fl.grad_inner(a, b, FD), rel=1e-11)


def test_laplacian_second_order_on_standing_wave():
    # cos(pi z / (2 Lz)) satisfies the Neumann face and the zero lid
    errs = []
    for n in (9, 17):
        fd = FlowDomain.around(PlateDomain(n, n), 4 * (n - 1), 4 * (n - 1), 2 * (n - 1), sponge_width=2)
        X, Y, Z = fd.coords()
        kx, kz = np.pi / fd.Lx, np.pi / (2 * fd.Lz)
        phi = np.sin(kx * X) * np.cos(kz * Z)
        err = fl.laplacian(phi, fd) + (kx ** 2 + kz ** 2) * phi
        errs.append(np.max(np.abs(err)))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_neumann_ghost_datum():
    # linear profile phi = -d z (outward derivative d) is reproduced at the face
    X, Y, Z = FD.coords()
    d = 0.7
    phi = -d * Z
    lap = fl.laplacian(phi, FD, np.full(FD.face_shape, d))
    assert np.allclose(lap[:, :, :-1], 0.0, atol=1e-10)


def test_numba_rhs_matches_reference():
    rng = np.random.default_rng(1)
    s = rand_state(rng)
    d = rng.standard_normal(FD.face_shape)
    p = FlowParams(U=2.0, mu=0.3)
    a = fl.flow_rhs(s, p, d, FD)
    b = fl.flow_rhs_reference(s, p, d, FD)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-9)


def test_rhs_trivial_examples():
    z = FlowState(FD.zeros(), FD.zeros())
    dphi, dpsi = fl.flow_rhs(z, FlowParams(2.0), None, FD)
    assert not dphi.any() and not dpsi.any()
    # phi = 0, psi = c: phi_t = c, psi_t = 0
    s = FlowState(FD.zeros(), np.full(FD.shape, 3.0))
    dphi, dpsi = fl.flow_rhs(s, FlowParams(2.0), None, FD)
    assert np.all(dphi == 3.0) and np.allclose(dpsi, 0.0)
    with pytest.raises(ValueError):
        fl.flow_rhs(z, FlowParams(), np.zeros((3, 3)), FD)


def test_advection_is_galilean():
    # psi = 0, phi = f(x): phi_t = -U f'(x), the discrete x-transport
    X, Y, Z = FD.coords()
    k = 2 * np.pi / (2 * FD.Lx)
    s = FlowState(np.sin(k * X), FD.zeros())
    dphi, _ = fl.flow_rhs(s, FlowParams(2.0), None, FD)
    symbol = np.sin(k * FD.hx) / FD.hx
    assert np.allclose(dphi, -2.0 * symbol * np.cos(k * X), atol=1e-12)


def test_downwash_support_and_value():
    v = np.ones(PD.shape)
    ux = np.ones(PD.shape)
    d = fl.downwash(v, ux, 2.0, FD)
    assert np.all(d[FD.plate_embed] == -3.0)
    mask = np.ones(FD.face_shape, bool)
    mask[FD.plate_embed] = False
    assert not d[mask].any()
    assert np.array_equal(fl.restrict_plate(d, FD), -3.0 * np.ones(PD.shape))


def test_sponge_profile_support_and_dissipation():
    sig = fl.sponge_profile(FD)
    assert sig.min() >= 0 and sig.max() <= FD.sponge_strength
    w = FD.sponge_width
    assert not sig[w:-w, w:-w, : FD.nz - w].any()
    # the plate image stays outside the shell
    assert not sig[FD.plate_embed][..., 0].any()
    rng = np.random.default_rng(2)
    s = rand_state(rng)
    inc = fl.apply_sponge(s, FD)
    assert not inc.phi.any()
    assert fl.flow_inner(inc.psi, s.psi, FD) <= 0
    assert not fl.sponge_profile(FD.with_sponge(width=0)).any()


def test_energy_kernel_matches_quadratures():
    rng = np.random.default_rng(3)
    s = rand_state(rng)
    psi2, grad2, phi2, dx2, psidx = fl.energy_terms(s.phi, s.psi, FD)
    phix = fl.dx_periodic(s.phi, FD.hx)
    assert psi2 == pytest.approx(fl.flow_inner(s.psi, s.psi, FD), rel=1e-12)
    assert grad2 == pytest.approx(fl.grad_norm_sq(s.phi, FD), rel=1e-12)
    assert phi2 == pytest.approx(fl.flow_inner(s.phi, s.phi, FD), rel=1e-12)
    assert dx2 == pytest.approx(fl.flow_inner(phix, phix, FD), rel=1e-12)
    assert psidx == pytest.approx(fl.flow_inner(s.psi, phix, FD), rel=1e-12)


def test_dx_periodic_is_skew():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal(FD.shape), rng.standard_normal(FD.shape)
    lhs = fl.flow_inner(fl.dx_periodic(a, FD.hx), b, FD)
    assert lhs == pytest.approx(-fl.flow_inner(a, fl.dx_periodic(b, FD.hx), FD), abs=1e-10)
