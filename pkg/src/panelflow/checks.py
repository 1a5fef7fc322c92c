"""Verification suites shared by the command line and the test-suite."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from . import flow as fl
from . import operators as op
from . import plate as pl
from .flow import FlowDomain
from .plate import PlateDomain, PlateModel


@dataclass(frozen=True)
class GeneratorReport:
    skewness: float        # max |(AA y, y)| / |y|^2
    pair_skewness: float   # max |(AA y, z) + (y, AA z)| / (|y| |z|)
    adjoint: float         # max relative error of <N* A psi, f> = <gamma psi, f>

    def passed(self, tol_skew=1e-10, tol_adj=1e-8):
        return self.skewness <= tol_skew and self.pair_skewness <= tol_skew and self.adjoint <= tol_adj


def generator_suite(fd: FlowDomain, U: float, mu: float = 1.0, pairs: int = 100, adjoint_pairs: int = 20,
                    seed: int = 0) -> GeneratorReport:
    rng = np.random.default_rng(seed)
    g = op.assemble(fd, mu)
    skew = pair = 0.0
    for _ in range(pairs):
        y = op.CoupledState.random(fd, rng)
        z = op.CoupledState.random(fd, rng)
        ay, az = op.generator_apply(y, g, U), op.generator_apply(z, g, U)
        ny, nz = op.y_norm(y, fd, mu), op.y_norm(z, fd, mu)
        skew = max(skew, abs(op.y_inner(ay, y, fd, mu)) / ny ** 2)
        pair = max(pair, abs(op.y_inner(ay, z, fd, mu) + op.y_inner(y, az, fd, mu)) / (ny * nz))
    return GeneratorReport(skew, pair, adjoint_suite(fd, mu, adjoint_pairs, rng))


def adjoint_suite(fd: FlowDomain, mu: float, pairs: int, rng) -> float:
    """``<N* A psi, f>`` (through a Neumann solve) against ``<gamma psi, f>`` for smooth random pairs."""
    from scipy.ndimage import gaussian_filter
    g = op.assemble(fd, mu)
    worst = 0.0
    for _ in range(pairs):
        psi = gaussian_filter(rng.standard_normal(fd.shape), 2, mode="wrap")
        f = gaussian_filter(rng.standard_normal(fd.face_shape), 2, mode="wrap")
        Nf = op.neumann_map(f, fd, mu)
        lhs = float(psi.ravel() @ (g.K @ Nf.ravel()))     # <A psi, N f>_W = <N* A psi, f>
        rhs = fl.face_inner(fl.trace_gamma(psi), f, fd)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    return worst


@dataclass(frozen=True)
class ResolventReport:
    max_bound_ratio: float     # max |lam| |V|_Y / |F|_Y, contract <= 1
    max_identity_error: float  # max |a(V,V) - lam |V|^2| / (|lam| |V|^2)
    max_residual: float


def resolvent_suite(fd: FlowDomain, U: float, lambdas=(-4, -1, -0.5, 0.5, 1, 4), samples: int = 10,
                    mu: float = 1.0, seed: int = 0) -> ResolventReport:
    rng = np.random.default_rng(seed)
    g = op.assemble(fd, mu)
    ratio = ident = resid = 0.0
    for lam in lambdas:
        lu = op.resolvent_factor(lam, g, U)
        for _ in range(samples):
            F = op.CoupledState.random(fd, rng)
            V, r = op.resolvent_solve(lam, F, g, U, return_residual=True, factor=lu)
            nv, nf = op.y_norm(V, fd, mu), op.y_norm(F, fd, mu)
            ratio = max(ratio, abs(lam) * nv / nf)
            a = op.a_form(V, V, lam, g, U)
            ident = max(ident, abs(a - lam * nv ** 2) / (abs(lam) * nv ** 2))
            resid = max(resid, r)
    return ResolventReport(ratio, ident, resid)


# ---------------------------------------------------------------------------
# f = Pi'

def smooth_clamped(dom: PlateDomain, rng, amplitude=1.0, modes=4):
    """Random clamped field built from ``sin^2``-windowed low Fourier modes."""
    X, Y = dom.coords()
    xs, ys = X / dom.lx, Y / dom.ly
    u = np.zeros(dom.shape)
    for _ in range(modes):
        a, b = rng.integers(1, 4, 2)
        u += rng.standard_normal() * np.sin(a * np.pi * xs + rng.uniform(0, np.pi)) * np.sin(
            b * np.pi * ys + rng.uniform(0, np.pi))
    u *= np.sin(np.pi * xs) ** 2 * np.sin(np.pi * ys) ** 2
    return pl.clamp(amplitude * u / max(np.max(np.abs(u)), 1e-300))


def gradient_error(model: PlateModel, u, w, dom: PlateDomain) -> float:
    """Relative gap between a central difference of ``Pi`` and ``<f(u), w>``."""
    eps = 1e-5 * np.sqrt(pl.l2_inner(u, u, dom)) / np.sqrt(pl.l2_inner(w, w, dom))
    fd_val = (pl.potential(model, u + eps * w, dom) - pl.potential(model, u - eps * w, dom)) / (2 * eps)
    an = float(pl.l2_inner(pl.nonlinear_force(model, u, dom), w, dom))
    return abs(fd_val - an) / max(abs(an), 1e-300)


def gradcheck_models(dom: PlateDomain):
    X, Y = dom.coords()
    F0 = 0.5 * 30.0 * ((X - dom.lx / 2) ** 2 + (Y - dom.ly / 2) ** 2)
    return {
        "kirchhoff": PlateModel.kirchhoff(),
        "vonkarman": PlateModel.vonkarman(),
        "vonkarman_F0": PlateModel.vonkarman(F0),
        "berger": PlateModel.berger(kappa=1.0, gamma_param=5.0),
    }


def gradcheck_suite(dom: PlateDomain, samples: int = 10, seed: int = 0, amplitude: float = 1.0) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for name, model in gradcheck_models(dom).items():
        worst = 0.0
        for _ in range(samples):
            u = smooth_clamped(dom, rng, amplitude)
            w = smooth_clamped(dom, rng, 1.0)
            worst = max(worst, gradient_error(model, u, w, dom))
        out[name] = worst
    return out


# ---------------------------------------------------------------------------
# refinement

@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    plate_n: int
    dt: float
    max_residual: float
    ratio: float


def convergence_table(sc, levels: int = 2, column: str = "residual_supersonic"):
    """Max ``|column|`` of the ledger for ``sc`` and its ``levels - 1`` refinements."""
    from .timestep import integrate
    rows = []
    prev = None
    for k in range(levels):
        s = sc.refined(k)
        traj = integrate(s)
        res = float(np.max(np.abs(dg.ledger_table(traj.ledger)[column])))
        rows.append(ConvergenceRow(k, s.plate.nx, traj.dt, res, prev / res if prev and res > 0 else float("nan")))
        prev = res
    return rows


def with_fields(sc, **sections):
    """Scenario copy with per-section field overrides."""
    kw = {name: dataclasses.replace(getattr(sc, name), **over) for name, over in sections.items()}
    return dataclasses.replace(sc, **kw)
