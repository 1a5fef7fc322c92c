"""Perturbed wave dynamics in the (phi, psi) variables on a truncated half-space.

The flow box is laterally periodic in x and y, carries a zero-Dirichlet lid
at ``z = Lz`` and the Neumann (downwash) face at ``z = 0``.  Flow arrays have
shape ``(nx, ny, nz)``; level ``k`` sits at ``z = k*hz`` and the lid is the
virtual level ``k = nz``.

The discrete flow inner products are the trapezoidal ones (half weight on the
``z = 0`` level).  With these weights the 7-point Laplacian with a ghost-cell
Neumann face is exactly ``-W^{-1} K`` where ``K`` is the edge-difference
stiffness, and the periodic central x-difference commutes with ``K``, so the
conservative part of the dynamics is skew to roundoff.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigurationError
from .plate import PlateDomain


@dataclass(frozen=True)
class FlowDomain:
    """Flow grid plus the node-aligned placement of the plate on the z=0 face.

    ``i0, j0`` is the face index of plate node ``(0, 0)``.
    """

    nx: int
    ny: int
    nz: int
    hx: float
    hy: float
    hz: float
    plate: PlateDomain
    i0: int
    j0: int
    sponge_width: int = 8
    sponge_strength: float = 20.0

    def __post_init__(self):
        if min(self.nx, self.ny) < 4 or self.nz < 2:
            raise ConfigurationError("flow grid too small")
        if not np.isclose(self.hx, self.plate.hx) or not np.isclose(self.hy, self.plate.hy):
            raise ConfigurationError("flow and plate spacings must agree on the face (node-aligned)")
        w = self.sponge_width
        if w < 0 or self.sponge_strength < 0:
            raise ConfigurationError("sponge width and strength must be nonnegative")
        px, py = self.plate.shape
        gaps = (self.i0, self.nx - (self.i0 + px), self.j0, self.ny - (self.j0 + py))
        if min(gaps) < max(w, 1):
            raise ConfigurationError(
                f"plate image must sit inside the face at least {max(w, 1)} cells from the lateral edges; gaps={gaps}")
        if w >= self.nz:
            raise ConfigurationError("sponge shell thicker than the flow box")

    @classmethod
    def around(cls, plate: PlateDomain, nx=64, ny=64, nz=32, hz=None, sponge_width=8, sponge_strength=20.0):
        """Flow box centred on ``plate`` with the plate spacing on the face."""
        i0 = (nx - (plate.nx - 1)) // 2
        j0 = (ny - (plate.ny - 1)) // 2
        return cls(nx, ny, nz, plate.hx, plate.hy, plate.hx if hz is None else hz, plate,
                   i0, j0, sponge_width, sponge_strength)

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def face_shape(self):
        return (self.nx, self.ny)

    @property
    def Lx(self):
        return 0.5 * self.nx * self.hx

    @property
    def Ly(self):
        return 0.5 * self.ny * self.hy

    @property
    def Lz(self):
        return self.nz * self.hz

    @property
    def extent(self):
        return (-self.Lx, self.Lx, -self.Ly, self.Ly, 0.0, self.Lz)

    @property
    def plate_embed(self):
        """Face slices covering the plate node grid."""
        return (slice(self.i0, self.i0 + self.plate.nx), slice(self.j0, self.j0 + self.plate.ny))

    @property
    def plate_origin(self):
        """Face coordinates of plate node (0, 0)."""
        return (-self.Lx + self.i0 * self.hx, -self.Ly + self.j0 * self.hy)

    def face_coords(self):
        x = -self.Lx + self.hx * np.arange(self.nx)
        y = -self.Ly + self.hy * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def coords(self):
        x = -self.Lx + self.hx * np.arange(self.nx)
        y = -self.Ly + self.hy * np.arange(self.ny)
        z = self.hz * np.arange(self.nz)
        return np.meshgrid(x, y, z, indexing="ij")

    def zweights(self) -> np.ndarray:
        c = np.ones(self.nz)
        c[0] = 0.5
        return c

    @property
    def cell(self) -> float:
        return self.hx * self.hy * self.hz

    @property
    def face_area(self) -> float:
        return self.hx * self.hy

    def zeros(self):
        return np.zeros(self.shape)

    def with_sponge(self, width=None, strength=None):
        return FlowDomain(self.nx, self.ny, self.nz, self.hx, self.hy, self.hz, self.plate, self.i0, self.j0,
                          self.sponge_width if width is None else width,
                          self.sponge_strength if strength is None else strength)


@dataclass
class FlowState:
    """Flow potential ``phi`` and acceleration potential ``psi = phi_t + U phi_x``."""

    phi: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class FlowParams:
    U: float = 2.0
    mu: float = 0.0

    def __post_init__(self):
        if self.U < 0:
            raise ConfigurationError("U must be nonnegative")
        if self.U == 1:
            raise ConfigurationError("U must differ from 1")
        if self.mu < 0:
            raise ConfigurationError("mu must be nonnegative")


# ---------------------------------------------------------------------------
# stencils

def dx_periodic(f: np.ndarray, h: float) -> np.ndarray:
    """Central difference along axis 0 with periodic wrap."""
    out = np.empty_like(f)
    out[1:-1] = f[2:] - f[:-2]
    out[0] = f[1] - f[-1]
    out[-1] = f[0] - f[-2]
    out /= 2 * h
    return out


def laplacian(phi: np.ndarray, fd: FlowDomain, d=None) -> np.ndarray:
    """7-point Laplacian: periodic sides, zero lid, ghost-cell Neumann face.

    ``d`` is the outward normal derivative on ``z = 0`` (normal ``-e_z``); the
    ghost value is ``phi_{-1} = phi_1 + 2 hz d``.
    """
    ix2, iy2, iz2 = fd.hx ** -2, fd.hy ** -2, fd.hz ** -2
    lap = phi * (-2.0 * (ix2 + iy2 + iz2))
    lap[1:] += ix2 * phi[:-1]
    lap[:-1] += ix2 * phi[1:]
    lap[0] += ix2 * phi[-1]
    lap[-1] += ix2 * phi[0]
    lap[:, 1:] += iy2 * phi[:, :-1]
    lap[:, :-1] += iy2 * phi[:, 1:]
    lap[:, 0] += iy2 * phi[:, -1]
    lap[:, -1] += iy2 * phi[:, 0]
    lap[:, :, 1:] += iz2 * phi[:, :, :-1]
    lap[:, :, :-1] += iz2 * phi[:, :, 1:]
    lap[:, :, 0] += iz2 * phi[:, :, 1]
    if d is not None:
        lap[:, :, 0] += (2.0 / fd.hz) * d
    return lap


@numba.njit(cache=True, parallel=False, fastmath=False)
def _rhs_kernel(phi, psi, d, sig, U, mu, hx, hy, hz, dphi, dpsi):
    nx, ny, nz = phi.shape
    ix2, iy2, iz2 = 1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz)
    c0 = -2.0 * (ix2 + iy2 + iz2)
    ax = U / (2.0 * hx)
    gz = 2.0 / hz
    for i in range(nx):
        im = i - 1 if i > 0 else nx - 1
        ip = i + 1 if i < nx - 1 else 0
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            for k in range(nz):
                p = phi[i, j, k]
                lz = phi[i, j, k + 1] if k < nz - 1 else 0.0
                if k > 0:
                    lz += phi[i, j, k - 1]
                else:
                    lz += phi[i, j, 1]
                lap = (c0 * p + ix2 * (phi[im, j, k] + phi[ip, j, k])
                       + iy2 * (phi[i, jm, k] + phi[i, jp, k]) + iz2 * lz)
                if k == 0:
                    lap += gz * d[i, j]
                dphi[i, j, k] = psi[i, j, k] - ax * (phi[ip, j, k] - phi[im, j, k])
                dpsi[i, j, k] = (lap - mu * p - ax * (psi[ip, j, k] - psi[im, j, k])
                                 - sig[i, j, k] * psi[i, j, k])


def flow_rhs(s: FlowState, p: FlowParams, d, fd: FlowDomain, sponge: bool = False, out=None):
    """Semi-discrete ``(phi_t, psi_t)`` for Neumann data ``d`` on the face.

    ``phi_t = psi - U phi_x``, ``psi_t = Delta phi - mu phi - U psi_x`` (minus
    ``sigma psi`` when ``sponge``).  ``out`` may supply the two output arrays.
    """
    if s.phi.shape != fd.shape or s.psi.shape != fd.shape:
        raise ValueError(f"flow state shape {s.phi.shape}/{s.psi.shape} != grid {fd.shape}")
    if d is None:
        d = np.zeros(fd.face_shape)
    elif np.shape(d) != fd.face_shape:
        raise ValueError(f"boundary data shape {np.shape(d)} != face {fd.face_shape}")
    sig = sponge_profile(fd) if sponge else _no_sponge(fd.shape)
    dphi, dpsi = out if out is not None else (np.empty(fd.shape), np.empty(fd.shape))
    _rhs_kernel(np.ascontiguousarray(s.phi), np.ascontiguousarray(s.psi), np.ascontiguousarray(d, dtype=float),
                sig, float(p.U), float(p.mu), fd.hx, fd.hy, fd.hz, dphi, dpsi)
    return dphi, dpsi


def flow_rhs_reference(s: FlowState, p: FlowParams, d, fd: FlowDomain):
    """Plain numpy version of :func:`flow_rhs` (no sponge); kept as a cross-check."""
    dphi = s.psi.copy()
    dpsi = laplacian(s.phi, fd, d)
    if p.U:
        dphi -= p.U * dx_periodic(s.phi, fd.hx)
        dpsi -= p.U * dx_periodic(s.psi, fd.hx)
    if p.mu:
        dpsi -= p.mu * s.phi
    return dphi, dpsi


@functools.lru_cache(maxsize=8)
def _no_sponge(shape):
    z = np.zeros(shape)
    z.setflags(write=False)
    return z


def embed_plate(field: np.ndarray, fd: FlowDomain) -> np.ndarray:
    """Extend a plate field by zero to the whole z=0 face."""
    out = np.zeros(fd.face_shape)
    out[fd.plate_embed] = field
    return out


def restrict_plate(face: np.ndarray, fd: FlowDomain) -> np.ndarray:
    return face[fd.plate_embed]


def downwash(v: np.ndarray, ux: np.ndarray, U: float, fd: FlowDomain) -> np.ndarray:
    """Neumann datum ``-(v + U u_x)`` on the plate image, zero elsewhere on the face."""
    return embed_plate(-(v + U * ux), fd)


def trace_gamma(f: np.ndarray) -> np.ndarray:
    """Restriction of a flow field to the z=0 node plane."""
    return f[:, :, 0]


@functools.lru_cache(maxsize=32)
def sponge_profile(fd: FlowDomain) -> np.ndarray:
    """Absorption rate sigma >= 0: cubic ramp inside the lateral and lid shells."""
    w = fd.sponge_width
    if w == 0 or fd.sponge_strength == 0:
        return np.zeros(fd.shape)

    def ramp(dist):
        r = np.clip((w - dist) / w, 0.0, 1.0)
        return r ** 3

    i = np.arange(fd.nx)
    j = np.arange(fd.ny)
    k = np.arange(fd.nz)
    sx = ramp(np.minimum(i, fd.nx - 1 - i).astype(float))
    sy = ramp(np.minimum(j, fd.ny - 1 - j).astype(float))
    sz = ramp((fd.nz - 1 - k).astype(float))
    sig = np.maximum(np.maximum(sx[:, None, None], sy[None, :, None]), sz[None, None, :])
    sig = fd.sponge_strength * sig
    sig.setflags(write=False)
    return sig


@functools.lru_cache(maxsize=32)
def _sponge_weights(fd: FlowDomain) -> np.ndarray:
    w = fd.cell * sponge_profile(fd) * fd.zweights()
    w.setflags(write=False)
    return w


@numba.njit(cache=True)
def _weighted_sq(w, f):
    acc = 0.0
    for i in range(f.size):
        acc += w.flat[i] * f.flat[i] * f.flat[i]
    return acc


def sponge_power(psi: np.ndarray, fd: FlowDomain) -> float:
    """Sponge dissipation rate ``(sigma psi, psi)`` in the trapezoidal metric."""
    return float(_weighted_sq(_sponge_weights(fd), np.ascontiguousarray(psi)))


def apply_sponge(s: FlowState, fd: FlowDomain) -> FlowState:
    """Sponge increment; damps ``psi`` only, so it never injects flow energy."""
    sig = sponge_profile(fd)
    return FlowState(phi=np.zeros(fd.shape), psi=-sig * s.psi)


# ---------------------------------------------------------------------------
# quadratures

def flow_inner(a: np.ndarray, b: np.ndarray, fd: FlowDomain) -> float:
    """Trapezoidal L2 pairing over the box."""
    return float(fd.cell * np.einsum("ijk,ijk,k->", a, b, fd.zweights()))


def grad_inner(a: np.ndarray, b: np.ndarray, fd: FlowDomain) -> float:
    """Edge-difference ``<grad a, grad b>`` (zero lid beyond the last level)."""
    c = fd.zweights()

    def diffs(f):
        fx = (np.roll(f, -1, axis=0) - f) / fd.hx
        fy = (np.roll(f, -1, axis=1) - f) / fd.hy
        fz = np.diff(f, axis=2, append=0.0) / fd.hz
        return fx, fy, fz

    ax, ay, az = diffs(a)
    bx, by, bz = diffs(b)
    lateral = np.einsum("ijk,ijk,k->", ax, bx, c) + np.einsum("ijk,ijk,k->", ay, by, c)
    return float(fd.cell * (lateral + np.sum(az * bz)))


def grad_norm_sq(phi, fd: FlowDomain) -> float:
    return grad_inner(phi, phi, fd)


def face_inner(a: np.ndarray, b: np.ndarray, fd: FlowDomain) -> float:
    """L2 pairing on the z=0 face (uniform weights)."""
    return float(fd.face_area * np.sum(a * b))


@numba.njit(cache=True)
def _energy_kernel(phi, psi, hx, hy, hz):
    nx, ny, nz = phi.shape
    psi2 = grad2 = phi2 = dx2 = psidx = 0.0
    for i in range(nx):
        ip = i + 1 if i < nx - 1 else 0
        im = i - 1 if i > 0 else nx - 1
        for j in range(ny):
            jp = j + 1 if j < ny - 1 else 0
            for k in range(nz):
                c = 0.5 if k == 0 else 1.0
                p = phi[i, j, k]
                ex = (phi[ip, j, k] - p) / hx
                ey = (phi[i, jp, k] - p) / hy
                ez = ((phi[i, j, k + 1] if k < nz - 1 else 0.0) - p) / hz
                dx = (phi[ip, j, k] - phi[im, j, k]) / (2.0 * hx)
                q = psi[i, j, k]
                psi2 += c * q * q
                phi2 += c * p * p
                dx2 += c * dx * dx
                psidx += c * q * dx
                grad2 += c * (ex * ex + ey * ey) + ez * ez
    return psi2, grad2, phi2, dx2, psidx


def energy_terms(phi: np.ndarray, psi: np.ndarray, fd: FlowDomain):
    """``(|psi|^2, |grad phi|^2, |phi|^2, |phi_x|^2, <psi, phi_x>)`` in one sweep.

    Same quadratures as :func:`flow_inner`, :func:`grad_inner` and :func:`dx_periodic`.
    """
    vals = _energy_kernel(np.ascontiguousarray(phi), np.ascontiguousarray(psi), fd.hx, fd.hy, fd.hz)
    return tuple(fd.cell * v for v in vals)
