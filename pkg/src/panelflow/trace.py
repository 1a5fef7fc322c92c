"""Fourier-Laplace trace machinery on the flat face.

Transform conventions: ``t -> tau = xi + i sigma`` (one-sided, damped) and
``(x, y) -> i mu``.  The half-space problem ``eta_tt = Delta eta`` with
Neumann datum ``-eta_z = h`` and zero initial data has the decaying solution
``eta^ = h^ exp(-z sqrt(s)) / sqrt(s)``, ``s = |mu|^2 + tau^2``, so the trace of
``eta_t`` is ``m h^`` with ``m = tau / sqrt(s)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flow as fl
from .flow import FlowDomain, FlowParams, FlowState


@dataclass(frozen=True)
class SpectralPoint:
    xi: float
    sigma: float
    mu1: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("xi must be positive")

    @property
    def mu_abs(self):
        return float(np.hypot(self.mu1, self.mu2))


def _s(xi, sigma, mu_abs):
    return (mu_abs ** 2 - sigma ** 2 + xi ** 2) + 2j * xi * sigma


def multiplier(xi, sigma=0.0, mu_abs=0.0):
    """``m = (xi + i sigma) / sqrt(s)`` on the principal branch (``Re sqrt(s) > 0``).

    Accepts a :class:`SpectralPoint` or broadcastable arrays.
    """
    if isinstance(xi, SpectralPoint):
        xi, sigma, mu_abs = xi.xi, xi.sigma, xi.mu_abs
    xi = np.asarray(xi, dtype=float)
    return (xi + 1j * np.asarray(sigma, float)) / np.sqrt(_s(xi, np.asarray(sigma, float), np.asarray(mu_abs, float)))


def multiplier_bound(xi, mu_abs):
    """``2 (1 + |mu|^2 / xi^2)^{1/4}``."""
    xi = np.asarray(xi, float)
    return 2.0 * (1.0 + (np.asarray(mu_abs, float) / xi) ** 2) ** 0.25


def bound_ratio(xi, sigma, mu_abs):
    return np.abs(multiplier(xi, sigma, mu_abs)) / multiplier_bound(xi, mu_abs)


def bound_check(n: int, seed: int = 0, chunk: int = 200_000) -> float:
    """Max of ``|m| / bound`` over ``n`` random points.

    ``xi`` is log-uniform on [1e-3, 1e3]; ``|sigma|`` and ``|mu|`` are
    log-uniform on [1e-3, 1e3] with 5% of draws set to exactly zero.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        xi = 10.0 ** rng.uniform(-3, 3, k)
        sig = 10.0 ** rng.uniform(-3, 3, k) * rng.choice([-1.0, 1.0], k)
        mu = 10.0 ** rng.uniform(-3, 3, k)
        sig[rng.random(k) < 0.05] = 0.0
        mu[rng.random(k) < 0.05] = 0.0
        worst = max(worst, float(np.max(bound_ratio(xi, sig, mu))))
        done += k
    return worst


def wedge_check(n_xi: int = 61, n_sigma: int = 61, n_off: int = 201) -> float:
    """Max ratio on a dense grid hugging the case boundaries ``|mu| = sigma/sqrt(2)``, ``|mu| = sqrt(2) sigma``
    and the resonance ``|mu|^2 = sigma^2 - xi^2``, where ``|s|`` is smallest."""
    xi = np.logspace(-3, 3, n_xi)[:, None, None]
    sig = np.logspace(-3, 3, n_sigma)[None, :, None]
    off = np.linspace(-1, 1, n_off)[None, None, :]
    worst = 0.0
    for centre in (sig / np.sqrt(2), np.sqrt(2) * sig):
        mu = np.abs(centre * (1 + 0.05 * off))
        worst = max(worst, float(np.max(bound_ratio(xi, sig, mu))))
    res = np.sqrt(np.clip(sig ** 2 - xi ** 2, 0, None))
    mu = np.abs(res + xi * off)
    worst = max(worst, float(np.max(bound_ratio(xi, sig, mu))))
    return worst


def halfspace_trace_spectrum(hhat, xi, sigma, mu_abs, z=None):
    """Spectral trace of ``eta_t`` for boundary data ``hhat``; with ``z`` also ``eta^(z)``.

    ``z`` adds a trailing axis to the returned profile.
    """
    hhat = np.asarray(hhat)
    trace = multiplier(xi, sigma, mu_abs) * hhat
    if z is None:
        return trace
    root = np.sqrt(_s(np.asarray(xi, float), np.asarray(sigma, float), np.asarray(mu_abs, float)))
    z = np.asarray(z, float)
    prof = (hhat / root)[..., None] * np.exp(-np.multiply.outer(root, z))
    return trace, prof


# ---------------------------------------------------------------------------
# fractional norms on the face

def face_wavenumbers(shape, hx, hy):
    k1 = 2 * np.pi * np.fft.fftfreq(shape[0], d=hx)
    k2 = 2 * np.pi * np.fft.fftfreq(shape[1], d=hy)
    return np.meshgrid(k1, k2, indexing="ij")


def sobolev_trace_norm(g, order: float, hx: float, hy: float) -> float:
    """Periodic ``H^order`` norm on the face; order 0 is the plain L2 norm.

    ``|g|^2 = (hx hy / N) sum |g^(mu)|^2 (1 + |mu|^2)^order``.
    """
    g = np.asarray(g, float)
    k1, k2 = face_wavenumbers(g.shape[-2:], hx, hy)
    w = (1.0 + k1 ** 2 + k2 ** 2) ** order
    gh = np.fft.fft2(g)
    n = g.shape[-2] * g.shape[-1]
    return np.sqrt(hx * hy / n * np.sum(np.abs(gh) ** 2 * w, axis=(-2, -1)))


@dataclass(frozen=True)
class TraceReport:
    lhs: float
    rhs_efl0: float
    rhs_flux: float
    ratio: float

    def lines(self):
        return [f"trace_lhs={self.lhs:.10e}", f"trace_rhs_efl0={self.rhs_efl0:.10e}",
                f"trace_rhs_flux={self.rhs_flux:.10e}", f"trace_ratio={self.ratio:.10e}"]


def _trapz(t, f):
    t, f = np.asarray(t, float), np.asarray(f, float)
    return float(np.sum(0.5 * np.diff(t) * (f[1:] + f[:-1]))) if t.size > 1 else 0.0


def trace_estimate_report(traj) -> TraceReport:
    """Empirical constant in ``int |gamma psi|_{-1/2}^2 <= C (E_fl(0) + int |d_nu phi|^2)``."""
    try:
        t = traj.times
        tr = traj.boundary["trace_hm12_sq"]
        flux = traj.boundary["flux_l2_sq"]
        efl0 = traj.ledger[0].E_fl
    except (AttributeError, KeyError, IndexError) as exc:
        raise ValueError(f"trajectory lacks boundary series: {exc}") from exc
    lhs, fl_int = _trapz(t, tr), _trapz(t, flux)
    den = efl0 + fl_int
    return TraceReport(lhs, efl0, fl_int, lhs / den if den > 0 else 0.0)


def galilean_shift(f, U: float, t: float, fd: FlowDomain):
    """``eta(x) = f(x + U t)`` by linear interpolation along x (axis -3)."""
    s = U * t
    limit = fd.Lx - fd.sponge_width * fd.hx
    if abs(s) > limit:
        raise ValueError(f"shift {s:g} leaves the valid region (|shift| <= {limit:g})")
    f = np.asarray(f, float)
    q, r = divmod(s / fd.hx, 1.0)
    q = int(q)
    a = np.roll(f, -q, axis=-3)
    if r == 0:
        return a
    return (1 - r) * a + r * np.roll(a, -1, axis=-3)


# ---------------------------------------------------------------------------
# time-domain cross-check of the multiplier

def damped_transform(series, t, xi, sigmas):
    """``int_0^T exp(-tau t) f(t) dt`` (trapezoid) for every sigma; time is axis 0."""
    series = np.asarray(series)
    w = np.full(t.size, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    kern = np.exp(-np.outer(xi + 1j * np.asarray(sigmas), t)) * w
    return np.tensordot(kern, series, axes=(1, 0))


@dataclass(frozen=True)
class PulseComparison:
    rel_error: float
    n_modes: int
    xi: float
    T: float


def pulse_cross_validation(h: float = 1 / 16, L: float = 2.0, Lz: float = 2.0, T: float = 3.0,
                           width: float = 0.2, duration: float = 0.5, kmax: float = 6.0,
                           smax: float = 6.0, safety: float = 0.5) -> PulseComparison:
    """U=0 flow driven by a Gaussian x sin^2 Neumann pulse; compare the damped
    Fourier-Laplace trace of ``psi`` with ``m h^`` over ``|mu| <= kmax``, ``|sigma| <= smax``.

    ``T < 2 Lz`` and the periodic image distance ``2L > T`` keep box echoes out
    of the window; the 3D response vanishes at the face once the pulse has
    passed, so the finite window loses essentially nothing.
    """
    from .plate import PlateDomain
    from .timestep import rk4_step

    n = int(round(2 * L / h))
    nz = int(round(Lz / h))
    pd = PlateDomain(9, 9, 8 * h, 8 * h)
    fd = FlowDomain.around(pd, nx=n, ny=n, nz=nz, sponge_width=0)
    X, Y = fd.face_coords()
    shape = np.exp(-(X ** 2 + Y ** 2) / width ** 2)

    def data(t):
        return shape * (np.sin(np.pi * t / duration) ** 2 if t < duration else 0.0)

    p = FlowParams(U=0.0, mu=0.0)
    dt = safety * h / np.sqrt(3.0)
    steps = int(np.ceil(T / dt))
    dt = T / steps
    nflow = int(np.prod(fd.shape))

    def rhs(t, y):
        s = FlowState(y[:nflow].reshape(fd.shape), y[nflow:].reshape(fd.shape))
        a, b = fl.flow_rhs(s, p, data(t), fd)
        return np.concatenate([a.ravel(), b.ravel()])

    y = np.zeros(2 * nflow)
    t = np.linspace(0, T, steps + 1)
    traces = np.empty((steps + 1,) + fd.face_shape)
    bdata = np.empty_like(traces)
    traces[0] = 0.0
    bdata[0] = data(0.0)
    for i in range(steps):
        y = rk4_step(y, dt, rhs, t[i])
        traces[i + 1] = y[nflow:].reshape(fd.shape)[:, :, 0]
        bdata[i + 1] = data(t[i + 1])

    xi = 4.0 / T
    sigmas = np.linspace(-smax, smax, 49)
    k1, k2 = face_wavenumbers(fd.face_shape, fd.hx, fd.hy)
    kabs = np.hypot(k1, k2)
    band = kabs <= kmax
    gh = np.fft.fft2(damped_transform(traces, t, xi, sigmas))[:, band]
    hh = np.fft.fft2(damped_transform(bdata, t, xi, sigmas))[:, band]
    pred = halfspace_trace_spectrum(hh, xi, sigmas[:, None], kabs[band][None, :])
    err = np.linalg.norm(gh - pred) / np.linalg.norm(pred)
    return PulseComparison(float(err), int(band.sum()), xi, T)
