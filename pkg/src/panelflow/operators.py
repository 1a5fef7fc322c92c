"""Generator, perturbation, Neumann map and the Y-space geometry.

The coupling blocks are assembled as exact transposes of each other:
``A N v = W^{-1} Gamma^T M_s E v`` and ``N^* A psi = R Gamma psi``, so the
boundary terms in ``(AA y, y)_Y`` cancel to roundoff rather than to
discretization accuracy.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import flow as fl
from . import plate as pl
from .errors import ConfigurationError, NumericError
from .flow import FlowDomain, FlowState


@dataclass
class CoupledState:
    """``y = (phi, psi; u, v)``; plate fields carry their (zero) boundary nodes."""

    flow: FlowState
    u: np.ndarray
    v: np.ndarray

    @property
    def phi(self):
        return self.flow.phi

    @property
    def psi(self):
        return self.flow.psi

    @classmethod
    def zeros(cls, fd: FlowDomain):
        return cls(FlowState(fd.zeros(), fd.zeros()), fd.plate.zeros(), fd.plate.zeros())

    @classmethod
    def random(cls, fd: FlowDomain, rng, smooth=False):
        """Random state with clamped plate parts.

        ``smooth=True`` low-pass filters every component so that flow fields
        are well resolved (used where solver accuracy matters).
        """
        phi, psi = rng.standard_normal(fd.shape), rng.standard_normal(fd.shape)
        u, v = rng.standard_normal(fd.plate.shape), rng.standard_normal(fd.plate.shape)
        if smooth:
            from scipy.ndimage import gaussian_filter
            phi = gaussian_filter(phi, 3, mode="wrap")
            psi = gaussian_filter(psi, 3, mode="wrap")
            u = gaussian_filter(u, 2)
            v = gaussian_filter(v, 2)
        return cls(FlowState(phi, psi), pl.clamp(u), pl.clamp(v))

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.phi.ravel(), self.psi.ravel(), self.u.ravel(), self.v.ravel()])

    @classmethod
    def from_flat(cls, vec: np.ndarray, fd: FlowDomain):
        """Views into ``vec`` (no copy)."""
        n, m = int(np.prod(fd.shape)), int(np.prod(fd.plate.shape))
        return cls(FlowState(vec[:n].reshape(fd.shape), vec[n:2 * n].reshape(fd.shape)),
                   vec[2 * n:2 * n + m].reshape(fd.plate.shape),
                   vec[2 * n + m:2 * n + 2 * m].reshape(fd.plate.shape))

    def copy(self):
        return CoupledState(FlowState(self.phi.copy(), self.psi.copy()), self.u.copy(), self.v.copy())

    def __add__(self, other):
        return CoupledState(FlowState(self.phi + other.phi, self.psi + other.psi), self.u + other.u,
                            self.v + other.v)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c):
        return CoupledState(FlowState(c * self.phi, c * self.psi), c * self.u, c * self.v)


def flat_size(fd: FlowDomain) -> int:
    return 2 * int(np.prod(fd.shape)) + 2 * int(np.prod(fd.plate.shape))


def y_inner(a: CoupledState, b: CoupledState, fd: FlowDomain, mu: float = 1.0) -> float:
    """``(a, b)_Y`` with the ``D(A^{1/2})`` flow metric ``<grad,grad> + mu <.,.>``."""
    dom = fd.plate
    val = fl.grad_inner(a.phi, b.phi, fd) + fl.flow_inner(a.psi, b.psi, fd)
    if mu:
        val += mu * fl.flow_inner(a.phi, b.phi, fd)
    val += float(pl.l2_inner(pl.laplacian_clamped(a.u, dom), pl.laplacian_clamped(b.u, dom), dom))
    val += float(pl.l2_inner(a.v, b.v, dom))
    return val


def y_norm(a: CoupledState, fd: FlowDomain, mu: float = 1.0) -> float:
    return float(np.sqrt(max(y_inner(a, a, fd, mu), 0.0)))


# ---------------------------------------------------------------------------
# sparse assembly

def _periodic_second(n, h):
    m = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]).tolil()
    m[0, n - 1] = 1.0
    m[n - 1, 0] = 1.0
    return m.tocsr() / h ** 2


def _periodic_central(n, h):
    m = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]).tolil()
    m[0, n - 1] = -1.0
    m[n - 1, 0] = 1.0
    return m.tocsr() / (2 * h)


def _z_second(n, h):
    m = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]).tolil()
    m[0, 1] = 2.0
    return m.tocsr() / h ** 2


@dataclass
class GeneratorMatrices:
    """Sparse pieces of the discrete generator (flow index = C-order over (nx, ny, nz)).

    Plate blocks act on interior plate nodes only.
    """

    fd: FlowDomain
    mu: float
    W: np.ndarray            # flow trapezoid weights (diagonal)
    K: sp.csr_matrix         # W * A, A = -Delta + mu
    Dx: sp.csr_matrix        # periodic central x-derivative on the flow grid
    B: sp.csc_matrix         # clamped biharmonic, plate interior
    Mp: float                # plate interior mass (uniform)
    Ms: float                # face mass (uniform)
    Gamma: sp.csr_matrix     # trace: flow -> face
    E: sp.csr_matrix         # zero extension: plate interior -> face
    DxFace: sp.csr_matrix    # periodic central x-derivative on the face

    @property
    def n_flow(self):
        return self.W.size

    @property
    def n_plate(self):
        return self.B.shape[0]

    @property
    def A(self):
        return sp.diags(1.0 / self.W) @ self.K

    @property
    def coupling(self):
        """``Gamma^T M_s E``: the flow-row image of a plate velocity."""
        return (self.Gamma.T @ (self.Ms * self.E)).tocsr()

    def gram(self) -> sp.csr_matrix:
        """Block-diagonal Y Gram matrix ``diag(K, W, M_p B, M_p)``."""
        return sp.block_diag([self.K, sp.diags(self.W), self.Mp * self.B,
                              self.Mp * sp.identity(self.n_plate)]).tocsr()

    def generator_matrix(self, U: float) -> sp.csr_matrix:
        iw = sp.diags(1.0 / self.W)
        nf, npl = self.n_flow, self.n_plate
        zf = sp.csr_matrix((nf, npl))
        zp = sp.csr_matrix((npl, nf))
        return sp.bmat([
            [-U * self.Dx, sp.identity(nf), zf, zf],
            [-(iw @ self.K), -U * self.Dx, zf, -(iw @ self.coupling)],
            [zp, zp, None, sp.identity(npl)],
            [zp, self.E.T @ self.Gamma, -self.B, None],
        ]).tocsr()

    def perturbation_matrix(self, U: float) -> sp.csr_matrix:
        """``PP``: the only nonzero block maps u to the psi row, ``-U A N D_x u``."""
        iw = sp.diags(1.0 / self.W)
        blk = -U * (iw @ self.Gamma.T @ (self.Ms * (self.DxFace @ self.E)))
        nf, npl = self.n_flow, self.n_plate
        return sp.bmat([
            [sp.csr_matrix((nf, nf)), None, sp.csr_matrix((nf, npl)), None],
            [None, sp.csr_matrix((nf, nf)), blk, None],
            [None, None, sp.csr_matrix((npl, npl)), None],
            [None, None, None, sp.csr_matrix((npl, npl))],
        ]).tocsr()

    def pack(self, y: CoupledState) -> np.ndarray:
        return np.concatenate([y.phi.ravel(), y.psi.ravel(), pl.interior(y.u).ravel(),
                               pl.interior(y.v).ravel()])

    def unpack(self, vec: np.ndarray) -> CoupledState:
        fd = self.fd
        nf, npl = self.n_flow, self.n_plate
        ishape = (fd.plate.nx - 2, fd.plate.ny - 2)
        return CoupledState(
            FlowState(vec[:nf].reshape(fd.shape).copy(), vec[nf:2 * nf].reshape(fd.shape).copy()),
            pl.embed_interior(vec[2 * nf:2 * nf + npl].reshape(ishape)),
            pl.embed_interior(vec[2 * nf + npl:].reshape(ishape)))


def assemble(fd: FlowDomain, mu: float = 1.0) -> GeneratorMatrices:
    """Assemble the sparse generator pieces for ``fd`` (mu defaults to 1)."""
    if mu < 0:
        raise ConfigurationError("mu must be nonnegative")
    nx, ny, nz = fd.shape
    ix, iy, iz = sp.identity(nx), sp.identity(ny), sp.identity(nz)
    lap = (sp.kron(sp.kron(_periodic_second(nx, fd.hx), iy), iz)
           + sp.kron(sp.kron(ix, _periodic_second(ny, fd.hy)), iz)
           + sp.kron(sp.kron(ix, iy), _z_second(nz, fd.hz)))
    W = fd.cell * np.tile(fd.zweights(), nx * ny)
    K = (sp.diags(W) @ (mu * sp.identity(W.size) - lap)).tocsr()
    K = (0.5 * (K + K.T)).tocsr()    # remove roundoff asymmetry
    Dx = sp.kron(sp.kron(_periodic_central(nx, fd.hx), iy), iz).tocsr()

    # trace picks level k=0 of every face column
    rows = np.arange(nx * ny)
    Gamma = sp.csr_matrix((np.ones(nx * ny), (rows, rows * nz)), shape=(nx * ny, W.size))

    dom = fd.plate
    mx, my = dom.nx - 2, dom.ny - 2
    pi, pj = np.meshgrid(np.arange(mx), np.arange(my), indexing="ij")
    face_idx = ((fd.i0 + 1 + pi) * ny + (fd.j0 + 1 + pj)).ravel()
    E = sp.csr_matrix((np.ones(mx * my), (face_idx, np.arange(mx * my))), shape=(nx * ny, mx * my))
    DxFace = sp.kron(_periodic_central(nx, fd.hx), sp.identity(ny)).tocsr()
    return GeneratorMatrices(fd, mu, W, K, Dx, pl.biharmonic_matrix(dom), dom.hx * dom.hy,
                             fd.face_area, Gamma, E, DxFace)


# ---------------------------------------------------------------------------
# Neumann map

@functools.lru_cache(maxsize=8)
def _amg(fd: FlowDomain, mu: float):
    g = assemble(fd, mu)
    return g, pyamg.smoothed_aggregation_solver(g.K.tocsr(), symmetry="symmetric")


def neumann_map(f: np.ndarray, fd: FlowDomain, mu: float = 1.0, rtol: float = 1e-12) -> np.ndarray:
    """``g = N f``: ``(-Delta + mu) g = 0`` in the box, ``d_nu g = f`` on ``z = 0``.

    Weak form ``K g = Gamma^T M_s f``; AMG-preconditioned CG.
    """
    if not mu > 0:
        raise ConfigurationError("the Neumann map requires mu > 0")
    f = np.asarray(f, dtype=float)
    if f.shape != fd.face_shape:
        raise ValueError(f"face field shape {f.shape} != {fd.face_shape}")
    if not np.any(f):
        return fd.zeros()
    g, ml = _amg(fd, float(mu))
    b = g.Gamma.T @ (g.Ms * f.ravel())
    res = []
    x = ml.solve(b, tol=rtol, accel="cg", maxiter=500, residuals=res)
    rel = np.linalg.norm(b - g.K @ x) / np.linalg.norm(b)
    if rel > max(1e-10, 10 * rtol):
        raise NumericError("Neumann map solve did not converge", rel)
    return x.reshape(fd.shape)


def neumann_adjoint_A(psi: np.ndarray, fd: FlowDomain, mu: float = 1.0) -> np.ndarray:
    """``N^* A psi`` computed through the solve route ``Gamma K^{-1} K psi``."""
    g, ml = _amg(fd, float(mu))
    x = ml.solve(g.K @ psi.ravel(), tol=1e-13, accel="cg", maxiter=500)
    return (g.Gamma @ x).reshape(fd.face_shape)


# ---------------------------------------------------------------------------
# generator and perturbation

def generator_apply(y: CoupledState, g: GeneratorMatrices, U: float) -> CoupledState:
    """``AA y = (-U phi_x + psi, -U psi_x - A(phi + N v), v, -B u + N^* A psi)``."""
    fd = g.fd
    phi, psi = y.phi.ravel(), y.psi.ravel()
    vi = pl.interior(y.v).ravel()
    dphi = psi - U * (g.Dx @ phi)
    dpsi = -U * (g.Dx @ psi) - (g.K @ phi) / g.W - (g.coupling @ vi) / g.W
    dv = -(g.B @ pl.interior(y.u).ravel()) + g.E.T @ (g.Gamma @ psi)
    ishape = (fd.plate.nx - 2, fd.plate.ny - 2)
    return CoupledState(FlowState(dphi.reshape(fd.shape), dpsi.reshape(fd.shape)),
                        pl.clamp(y.v), pl.embed_interior(dv.reshape(ishape)))


def perturbation_pair(u: np.ndarray, z: CoupledState, U: float, fd: FlowDomain) -> float:
    """Weak action ``(PP_# u, z)_Y = -U <u_x, gamma[psi_z]>`` over the plate."""
    ux = fl.embed_plate(pl.dx_zero_extended(u, fd.plate), fd)
    return -U * fl.face_inner(ux, fl.trace_gamma(z.psi), fd)


def perturbation_apply(u: np.ndarray, U: float, fd: FlowDomain) -> CoupledState:
    """Strong discrete form of ``PP_# u``: a psi-row forcing only."""
    y = CoupledState.zeros(fd)
    d = fl.downwash(np.zeros(fd.plate.shape), pl.dx_zero_extended(u, fd.plate), U, fd)
    y.flow.psi[:, :, 0] = (2.0 / fd.hz) * d
    return y


# ---------------------------------------------------------------------------
# resolvent

def galerkin_matrix(lam: float, g: GeneratorMatrices, U: float) -> sp.csr_matrix:
    """Matrix of ``a(V, V~) = V~^T G (lam - AA) V`` on the full nodal basis."""
    n = g.gram().shape[0]
    return (g.gram() @ (lam * sp.identity(n) - g.generator_matrix(U))).tocsr()


def a_form(V: CoupledState, Vt: CoupledState, lam: float, g: GeneratorMatrices, U: float) -> float:
    return float(g.pack(Vt) @ (galerkin_matrix(lam, g, U) @ g.pack(V)))


def resolvent_factor(lam: float, g: GeneratorMatrices, U: float):
    """Sparse LU of ``lam - AA``; reuse it across right-hand sides with :func:`resolvent_solve`."""
    if lam == 0:
        raise ConfigurationError("resolvent requires lambda != 0")
    n = g.gram().shape[0]
    try:
        return spla.splu((lam * sp.identity(n) - g.generator_matrix(U)).tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:  # exactly singular
        raise NumericError(f"resolvent factorization failed: {exc}") from exc


def resolvent_solve(lam: float, F: CoupledState, g: GeneratorMatrices, U: float, return_residual=False,
                    factor=None):
    """Solve ``a(V, V~) = (F, V~)_Y`` for all ``V~``, i.e. ``(lam - AA) V = F``.

    The Gram matrix is nonsingular, so the Galerkin system and the strong one
    share their solution; the strong one is factored (it is much sparser) and
    the returned residual is the Galerkin one.
    """
    if lam == 0:
        raise ConfigurationError("resolvent requires lambda != 0")
    f = g.pack(F)
    rhs = g.gram() @ f
    if not np.any(rhs):
        V, res = np.zeros_like(rhs), 0.0
    else:
        lu = factor if factor is not None else resolvent_factor(lam, g, U)
        V = lu.solve(f)
        res = float(np.linalg.norm(galerkin_matrix(lam, g, U) @ V - rhs) / np.linalg.norm(rhs))
        if not np.all(np.isfinite(V)) or res > 1e-8:
            raise NumericError("resolvent solve inaccurate", res)
    out = g.unpack(V)
    return (out, res) if return_residual else out
