"""Clamped-plate operators, plate nonlinearities and their potentials.

Plate fields are plain ``ndarray`` objects of shape ``(..., nx, ny)`` sampled
on the nodes of a :class:`PlateDomain`; index ``[i, j]`` is the node
``(i*hx, j*hy)``.  Clamped fields vanish on the boundary nodes and the normal
derivative condition is carried by mirrored ghost values, so every operator
here only ever reads interior values of a clamped field.

All quadratures are trapezoidal.  For clamped fields this makes
``laplacian_norm_sq(u) == <biharmonic_apply(u), u>`` exactly, which is what
lets the discrete energy identities close to roundoff.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate

from .errors import ConfigurationError, NumericError

MODEL_KINDS = ("linear", "kirchhoff", "vonkarman", "berger")


@dataclass(frozen=True)
class PlateDomain:
    """Uniform node grid on the rectangle ``[0, lx] x [0, ly]``."""

    nx: int = 33
    ny: int = 33
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 5 or self.ny < 5:
            raise ConfigurationError(
                f"plate grid {self.nx}x{self.ny} too small for the 13-point stencil (need >= 5x5)")
        if not (self.lx > 0 and self.ly > 0):
            raise ConfigurationError("plate extent must be positive")

    @property
    def hx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def extent(self):
        return (0.0, self.lx, 0.0, self.ly)

    @property
    def diam(self) -> float:
        return float(np.hypot(self.lx, self.ly))

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def n_interior(self) -> int:
        return (self.nx - 2) * (self.ny - 2)

    def coords(self):
        x = np.linspace(0.0, self.lx, self.nx)
        y = np.linspace(0.0, self.ly, self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def weights(self) -> np.ndarray:
        wx = np.full(self.nx, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    def zeros(self, *batch) -> np.ndarray:
        return np.zeros(batch + self.shape)


def _check_shape(u, dom: PlateDomain):
    if u.shape[-2:] != dom.shape:
        raise ValueError(f"field shape {u.shape[-2:]} does not match plate grid {dom.shape}")


def clamp(u: np.ndarray) -> np.ndarray:
    """Copy of ``u`` with its boundary nodes zeroed."""
    out = np.array(u, dtype=float, copy=True)
    out[..., 0, :] = 0.0
    out[..., -1, :] = 0.0
    out[..., :, 0] = 0.0
    out[..., :, -1] = 0.0
    return out


def interior(u: np.ndarray) -> np.ndarray:
    return u[..., 1:-1, 1:-1]


def embed_interior(g: np.ndarray) -> np.ndarray:
    """Zero-pad an interior-node array back to the full node grid."""
    out = np.zeros(g.shape[:-2] + (g.shape[-2] + 2, g.shape[-1] + 2))
    out[..., 1:-1, 1:-1] = g
    return out


def l2_inner(a, b, dom: PlateDomain):
    """Trapezoidal L2 pairing on the plate (batched over leading axes)."""
    return np.sum(a * b * dom.weights(), axis=(-2, -1))


# ---------------------------------------------------------------------------
# linear operators

def laplacian_clamped(u: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Laplacian of a clamped field on *all* nodes, boundary included.

    Ghost values mirror the first interior row (``u_ghost = u_interior``),
    which encodes the zero normal derivative.
    """
    _check_shape(u, dom)
    hx2, hy2 = dom.hx ** 2, dom.hy ** 2
    p = np.pad(u, [(0, 0)] * (u.ndim - 2) + [(1, 1), (1, 1)])
    p[..., 0, :] = p[..., 2, :]
    p[..., -1, :] = p[..., -3, :]
    p[..., :, 0] = p[..., :, 2]
    p[..., :, -1] = p[..., :, -3]
    c = p[..., 1:-1, 1:-1]
    return ((p[..., 2:, 1:-1] - 2 * c + p[..., :-2, 1:-1]) / hx2
            + (p[..., 1:-1, 2:] - 2 * c + p[..., 1:-1, :-2]) / hy2)


def _laplacian_interior(g: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Five-point Laplacian of a full-grid field, evaluated at interior nodes."""
    c = g[..., 1:-1, 1:-1]
    return ((g[..., 2:, 1:-1] - 2 * c + g[..., :-2, 1:-1]) / dom.hx ** 2
            + (g[..., 1:-1, 2:] - 2 * c + g[..., 1:-1, :-2]) / dom.hy ** 2)


def biharmonic_apply(u: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """13-point clamped biharmonic; zero on the boundary nodes.

    Computed as the five-point Laplacian of :func:`laplacian_clamped`, which
    reproduces the ghost-reflected 13-point stencil.
    """
    return embed_interior(_laplacian_interior(laplacian_clamped(u, dom), dom))


def laplacian_dirichlet(u: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Five-point Laplacian at interior nodes, zero on the boundary."""
    return embed_interior(_laplacian_interior(u, dom))


def laplacian_norm_sq(u, dom: PlateDomain):
    """``||Delta u||^2`` for clamped ``u`` (trapezoidal, ghost-reflected)."""
    lap = laplacian_clamped(u, dom)
    return l2_inner(lap, lap, dom)


def grad_norm_sq(u, dom: PlateDomain):
    """``int |grad u|^2`` as the edge-difference quadrature.

    Its gradient in the plate L2 metric is exactly ``-2 * laplacian_dirichlet``.
    """
    ex = np.diff(u, axis=-2) / dom.hx
    ey = np.diff(u, axis=-1) / dom.hy
    area = dom.hx * dom.hy
    return area * (np.sum(ex ** 2, axis=(-2, -1)) + np.sum(ey ** 2, axis=(-2, -1)))


def dx_zero_extended(u: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Central x-difference of ``u`` extended by zero outside the node grid.

    For a clamped field the result is supported on the closed plate, and it is
    nonzero on the x-boundary nodes.  This is the ``u_x`` used in the downwash.
    """
    p = np.pad(u, [(0, 0)] * (u.ndim - 2) + [(1, 1), (0, 0)])
    return (p[..., 2:, :] - p[..., :-2, :]) / (2 * dom.hx)


@functools.lru_cache(maxsize=16)
def biharmonic_matrix(dom: PlateDomain) -> sp.csc_matrix:
    """Sparse clamped biharmonic on interior nodes (row-major ``i*(ny-2)+j``)."""
    def second(n, h):
        d = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h ** 2
        return d.tocsr()

    mx, my = dom.nx - 2, dom.ny - 2
    dxx, dyy = second(mx, dom.hx), second(my, dom.hy)
    bx = (dxx @ dxx).tolil()
    bx[0, 0] += 2 / dom.hx ** 4
    bx[-1, -1] += 2 / dom.hx ** 4
    by = (dyy @ dyy).tolil()
    by[0, 0] += 2 / dom.hy ** 4
    by[-1, -1] += 2 / dom.hy ** 4
    ix, iy = sp.identity(mx), sp.identity(my)
    return (sp.kron(bx.tocsr(), iy) + 2 * sp.kron(dxx, dyy) + sp.kron(ix, by.tocsr())).tocsc()


@functools.lru_cache(maxsize=16)
def _biharmonic_lu(dom: PlateDomain):
    return spla.splu(biharmonic_matrix(dom))


def biharmonic_solve(g: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Clamped solution of ``Delta^2 v = g`` (interior values of ``g`` used)."""
    gi = interior(g)
    batch = gi.shape[:-2]
    rhs = gi.reshape(-1, dom.n_interior).T
    sol = _biharmonic_lu(dom).solve(np.ascontiguousarray(rhs))
    return embed_interior(sol.T.reshape(batch + (dom.nx - 2, dom.ny - 2)))


def omega_max(dom: PlateDomain) -> float:
    """Upper bound on sqrt(lambda_max) of the discrete clamped biharmonic."""
    return 4.0 * (1 / dom.hx ** 2 + 1 / dom.hy ** 2)


def lambda1(dom: PlateDomain, tol: float = 1e-8, maxiter: int = 500) -> float:
    """Smallest eigenvalue of the discrete clamped biharmonic (inverse power iteration)."""
    return _lambda1(dom, tol, maxiter)[0]


def first_mode(dom: PlateDomain, tol: float = 1e-12) -> np.ndarray:
    """Eigenvector belonging to :func:`lambda1`, full grid, positive with unit max."""
    v = embed_interior(_lambda1(dom, tol, 2000)[1].reshape(dom.nx - 2, dom.ny - 2))
    v = v * np.sign(v[dom.nx // 2, dom.ny // 2])
    return v / np.max(np.abs(v))


@functools.lru_cache(maxsize=16)
def _lambda1(dom, tol, maxiter):
    lu = _biharmonic_lu(dom)
    b = biharmonic_matrix(dom)
    x_, y_ = dom.coords()
    x = interior(np.sin(np.pi * x_ / dom.lx) * np.sin(np.pi * y_ / dom.ly)).ravel()
    x /= np.linalg.norm(x)
    lam = x @ (b @ x)
    for _ in range(maxiter):
        y = lu.solve(x)
        y /= np.linalg.norm(y)
        new = y @ (b @ y)
        if abs(new - lam) <= tol * abs(new):
            return float(new), y
        x, lam = y, new
    raise NumericError("inverse power iteration for lambda1 stalled", abs(new - lam) / abs(new))


# ---------------------------------------------------------------------------
# von Karman bracket

def _dxx(u, dom):
    return (u[..., 2:, 1:-1] - 2 * u[..., 1:-1, 1:-1] + u[..., :-2, 1:-1]) / dom.hx ** 2


def _dyy(u, dom):
    return (u[..., 1:-1, 2:] - 2 * u[..., 1:-1, 1:-1] + u[..., 1:-1, :-2]) / dom.hy ** 2


def _dxy(u, dom):
    return (u[..., 2:, 2:] - u[..., 2:, :-2] - u[..., :-2, 2:] + u[..., :-2, :-2]) / (4 * dom.hx * dom.hy)


def _hessian(u, dom: PlateDomain):
    """Centered second differences at interior nodes."""
    return _dxx(u, dom), _dyy(u, dom), _dxy(u, dom)


def bracket_pointwise(u, w, dom: PlateDomain) -> np.ndarray:
    """``u_xx w_yy + u_yy w_xx - 2 u_xy w_xy`` with centered differences (interior nodes)."""
    uxx, uyy, uxy = _hessian(u, dom)
    wxx, wyy, wxy = _hessian(w, dom)
    return embed_interior(uxx * wyy + uyy * wxx - 2 * uxy * wxy)


def _bracket_transpose(a, b, dom: PlateDomain):
    # Riesz representer of c -> sum_interior a * [b, c]; the centered stencils
    # are symmetric, so the transpose is the same stencil on zero-padded data.
    bxx, byy, bxy = _hessian(b, dom)
    ai = interior(a)
    gxx = embed_interior(ai * byy)   # multiplies c_xx
    gyy = embed_interior(ai * bxx)   # multiplies c_yy
    gxy = embed_interior(ai * bxy)   # multiplies c_xy
    return embed_interior(_dxx(gxx, dom) + _dyy(gyy, dom) - 2 * _dxy(gxy, dom))


def vk_bracket(u: np.ndarray, w: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Discrete von Karman bracket ``[u, w]``.

    The returned field is the representer of ``c -> T(u, w, c)`` where ``T`` is
    the cyclic average of ``sum [a, b] c`` over the three argument slots, built
    from centered second differences.  ``T`` is exactly symmetric in all three
    slots, so ``<[u, w], c> = <[u, c], w>`` holds to roundoff for clamped
    ``w, c``.  Away from the boundary this is the usual centered bracket and it
    is exact on quadratics.
    """
    if u.shape[-2:] != w.shape[-2:]:
        raise ValueError("vk_bracket: fields live on different grids")
    _check_shape(u, dom)
    return (bracket_pointwise(u, w, dom)
            + _bracket_transpose(u, w, dom)
            + _bracket_transpose(w, u, dom)) / 3.0


def airy_solve(u: np.ndarray, dom: PlateDomain, rtol: float = 1e-10) -> np.ndarray:
    """Airy stress function: clamped ``v`` with ``Delta^2 v = -[u, u]``."""
    rhs = -vk_bracket(u, u, dom)
    v = biharmonic_solve(rhs, dom)
    res = interior(biharmonic_apply(v, dom) - rhs)
    scale = np.sqrt(np.sum(interior(rhs) ** 2))
    err = np.sqrt(np.sum(res ** 2))
    if scale > 0 and err > rtol * scale:
        raise NumericError("Airy solve did not reach tolerance", err / scale)
    return v


# ---------------------------------------------------------------------------
# plate models

def _cubic(s):
    return s ** 3


def _cubic_primitive(s):
    return 0.25 * s ** 4


@dataclass(frozen=True)
class PlateModel:
    """Nonlinearity selector with its parameters.

    ``pointwise_law`` is the Kirchhoff ``f(s)``; ``primitive`` optionally gives
    ``F(s) = int_0^s f``, otherwise it is obtained by adaptive quadrature.
    """

    kind: str = "linear"
    pointwise_law: Optional[Callable] = None
    primitive: Optional[Callable] = None
    F0: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    kappa: float = 1.0
    gamma_param: float = 0.0
    damping_k: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown plate model {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "berger" and not self.kappa > 0:
            raise ConfigurationError("Berger model needs kappa > 0")
        if self.damping_k < 0:
            raise ConfigurationError("damping_k must be nonnegative")
        if self.kind == "kirchhoff" and self.pointwise_law is None:
            object.__setattr__(self, "pointwise_law", _cubic)
            object.__setattr__(self, "primitive", _cubic_primitive)

    @classmethod
    def kirchhoff(cls, law=_cubic, primitive=None, **kw):
        if law is _cubic and primitive is None:
            primitive = _cubic_primitive
        return cls(kind="kirchhoff", pointwise_law=law, primitive=primitive, **kw)

    @classmethod
    def vonkarman(cls, F0=None, **kw):
        return cls(kind="vonkarman", F0=F0, **kw)

    @classmethod
    def berger(cls, kappa=1.0, gamma_param=0.0, **kw):
        return cls(kind="berger", kappa=kappa, gamma_param=gamma_param, **kw)


def _F0(model: PlateModel, u):
    if model.F0 is None:
        return np.zeros(u.shape[-2:])
    return np.asarray(model.F0, dtype=float)


def _primitive_values(model: PlateModel, u):
    if model.primitive is not None:
        return model.primitive(u)
    f = model.pointwise_law
    return np.vectorize(lambda s: integrate.quad(f, 0.0, s, epsabs=1e-13, epsrel=1e-12)[0])(u)


def nonlinear_force(model: PlateModel, u: np.ndarray, dom: PlateDomain) -> np.ndarray:
    """Nonlinear force ``f(u)``; the L2 gradient of :func:`potential`."""
    _check_shape(u, dom)
    if model.kind == "linear":
        return np.zeros_like(u, dtype=float)
    if model.kind == "kirchhoff":
        return clamp(model.pointwise_law(u))
    if model.kind == "vonkarman":
        v = airy_solve(u, dom)
        return -vk_bracket(u, v + _F0(model, u), dom)
    q = grad_norm_sq(u, dom)
    coeff = model.kappa * q - model.gamma_param
    return -np.asarray(coeff)[..., None, None] * laplacian_dirichlet(u, dom)


def potential(model: PlateModel, u: np.ndarray, dom: PlateDomain):
    """Potential energy ``Pi(u)`` of the nonlinear force."""
    _check_shape(u, dom)
    if model.kind == "linear":
        return np.zeros(u.shape[:-2]) if u.ndim > 2 else 0.0
    if model.kind == "kirchhoff":
        return l2_inner(clamp(_primitive_values(model, u)), np.ones(dom.shape), dom)
    if model.kind == "vonkarman":
        v = airy_solve(u, dom)
        return 0.25 * laplacian_norm_sq(v, dom) - 0.5 * l2_inner(vk_bracket(u, _F0(model, u), dom), u, dom)
    q = grad_norm_sq(u, dom)
    return 0.25 * model.kappa * q ** 2 - 0.5 * model.gamma_param * q


def max_principle_margin(u: np.ndarray, dom: PlateDomain):
    """``(diam/sqrt(pi)) * ||[u,u]||_{L1}^{1/2} - max|u|``; nonnegative in the continuum."""
    l1 = l2_inner(np.abs(vk_bracket(u, u, dom)), np.ones(dom.shape), dom)
    return dom.diam / np.sqrt(np.pi) * np.sqrt(l1) - np.max(np.abs(u), axis=(-2, -1))


def coercivity_margin(model: PlateModel, u, eta: float, C: float, dom: PlateDomain):
    """``eta ||Delta u||^2 + Pi(u) + C``."""
    if not eta < 0.5:
        raise ConfigurationError("coercivity requires eta < 1/2")
    return eta * laplacian_norm_sq(u, dom) + potential(model, u, dom) + C


def _bracket_quadratic_form(F0, dom: PlateDomain) -> np.ndarray:
    """Symmetric matrix S on interior nodes with ``u^T S u = <[u, F0], u>``."""
    n = dom.n_interior
    basis = np.zeros((n,) + dom.shape)
    basis[np.arange(n), 1 + np.arange(n) // (dom.ny - 2), 1 + np.arange(n) % (dom.ny - 2)] = 1.0
    cols = interior(vk_bracket(basis, np.broadcast_to(F0, basis.shape), dom)).reshape(n, n)
    s = cols * dom.hx * dom.hy
    return 0.5 * (s + s.T)


def coercivity_constants(model: PlateModel, dom: PlateDomain):
    """Constants ``(eta, C)`` for which ``coercivity_margin >= 0`` is guaranteed.

    * linear, von Karman with ``F0 = 0``, Kirchhoff with a nonnegative primitive: ``(0, 0)``.
    * Berger: ``C = Gamma^2 / (4 kappa)`` for ``Gamma > 0`` (minus the minimum of
      ``kappa/4 Q^2 - Gamma/2 Q`` over ``Q >= 0``).
    * von Karman with ``F0 != 0``: ``eta`` is half the largest generalized
      eigenvalue of ``(S, M B)`` where ``u^T S u = <[u, F0], u>``; the quartic
      Airy part is nonnegative and is dropped.
    """
    if model.kind == "berger":
        g = model.gamma_param
        return 0.0, (g * g / (4 * model.kappa) if g > 0 else 0.0)
    if model.kind == "vonkarman" and model.F0 is not None and np.any(model.F0 != 0):
        import scipy.linalg as sla
        s = _bracket_quadratic_form(np.asarray(model.F0, float), dom)
        mb = (dom.hx * dom.hy * biharmonic_matrix(dom)).toarray()
        top = sla.eigh(s, mb, eigvals_only=True, subset_by_index=[s.shape[0] - 1, s.shape[0] - 1])[0]
        eta = max(0.0, 0.5 * top) * (1 + 1e-9)
        if not eta < 0.5:
            raise ConfigurationError(f"F0 too large: derived eta={eta:.3f} violates eta < 1/2")
        return eta, 0.0
    if model.kind == "kirchhoff":
        # sampled lower bound of F(s)/s^2; a negative slope is absorbed by eta via lambda1
        s = np.linspace(-50, 50, 2001)
        s = s[s != 0]
        ratio = np.min(_primitive_values(model, s) / s ** 2)
        if ratio >= 0:
            return 0.0, 0.0
        return min(0.499, -ratio / lambda1(dom) * (1 + 1e-9)), 0.0
    return 0.0, 0.0
