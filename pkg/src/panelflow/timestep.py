"""Explicit RK4 integration of the coupled flow-plate system and the Picard
(variation of parameters) construction.

The integrated vector is the flat state (``CoupledState.to_flat`` layout)
followed by two scalars: the leak ``U int <u_x, gamma psi>`` and the sponge
loss ``int (sigma psi, psi)``.  Carrying them through the same RK4 stages makes
the ledger residuals measure only the time-discretization error.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import diagnostics as dg
from . import flow as fl
from . import plate as pl
from .errors import ConfigurationError
from .flow import FlowDomain, FlowParams, FlowState
from .operators import CoupledState, flat_size
from .plate import PlateModel
from .trace import sobolev_trace_norm

RK4_IMAG_LIMIT = 2.0 * np.sqrt(2.0)


def cfl_dt(fd: FlowDomain, U: float, safety: float = 0.5, plate: bool = True) -> float:
    """``safety * min(h) / (sqrt(3) + U)``, further capped by the plate's RK4 limit.

    The plate cap ``2 sqrt(2) / omega_max`` is what binds on plate-resolving
    grids; ``plate=False`` gives the bare flow rule.
    """
    if not 0 < safety <= 1:
        raise ConfigurationError("safety must lie in (0, 1]")
    dt = min(fd.hx, fd.hy, fd.hz) / (np.sqrt(3.0) + U)
    if plate:
        dt = min(dt, RK4_IMAG_LIMIT / pl.omega_max(fd.plate))
    return safety * dt


def rk4_step(y, dt: float, rhs: Callable, t: float = 0.0):
    """One classical RK4 step of ``y' = rhs(t, y)``; ``y`` is an array or a CoupledState."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if isinstance(y, CoupledState):
        fd_shape = y.phi.shape
        vec = y.to_flat()

        def frhs(tt, yy):
            return rhs(tt, _view(yy, fd_shape, y.u.shape)).to_flat()

        out = rk4_step(vec, dt, frhs, t)
        return _view(out, fd_shape, y.u.shape)
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class _RK4:
    """In-place RK4 for flat vectors (same arithmetic as :func:`rk4_step`, fewer temporaries)."""

    def __init__(self, n):
        self.tmp = np.empty(n)
        self.acc = np.empty(n)

    def step(self, y, dt, rhs, t):
        tmp, acc = self.tmp, self.acc
        k = rhs(t, y)
        np.multiply(k, 1.0, out=acc)
        np.multiply(k, 0.5 * dt, out=tmp)
        tmp += y
        k = rhs(t + 0.5 * dt, tmp)
        acc += 2.0 * k
        np.multiply(k, 0.5 * dt, out=tmp)
        tmp += y
        k = rhs(t + 0.5 * dt, tmp)
        acc += 2.0 * k
        np.multiply(k, dt, out=tmp)
        tmp += y
        k = rhs(t + dt, tmp)
        acc += k
        acc *= dt / 6.0
        y += acc
        return y


def _view(vec, fshape, pshape):
    n, m = int(np.prod(fshape)), int(np.prod(pshape))
    return CoupledState(FlowState(vec[:n].reshape(fshape), vec[n:2 * n].reshape(fshape)),
                        vec[2 * n:2 * n + m].reshape(pshape), vec[2 * n + m:].reshape(pshape))


# ---------------------------------------------------------------------------
# the coupled system

@dataclass(frozen=True)
class CoupledSystem:
    """Right-hand side options.

    ``coupled``: exchange downwash and pressure.  ``perturbation``: keep the
    ``U u_x`` part of the downwash.  ``forcing``: a callable ``t -> ubar_x``
    replacing the state's own ``u_x`` there (inhomogeneous problem).
    """

    fd: FlowDomain
    params: FlowParams = field(default_factory=FlowParams)
    model: PlateModel = field(default_factory=PlateModel)
    coupled: bool = True
    sponge: bool = True
    perturbation: bool = True
    forcing: Optional[Callable] = field(default=None, compare=False)

    @property
    def n_state(self):
        return flat_size(self.fd)

    def state_view(self, Y) -> CoupledState:
        return CoupledState.from_flat(Y[:self.n_state], self.fd)

    def _ux(self, t, u):
        if self.forcing is not None:
            return self.forcing(t)
        if self.perturbation:
            return pl.dx_zero_extended(u, self.fd.plate)
        return None

    def rhs(self, t: float, Y: np.ndarray) -> np.ndarray:
        fd, p = self.fd, self.params
        dom = fd.plate
        y = self.state_view(Y)
        dY = np.empty_like(Y)
        dy = self.state_view(dY)
        ux = self._ux(t, y.u)
        if self.coupled:
            d = fl.downwash(y.v, 0.0 if ux is None else ux, p.U, fd)
        else:
            d = None
        fl.flow_rhs(y.flow, p, d, fd, sponge=self.sponge, out=(dy.phi, dy.psi))

        dy.u[...] = y.v
        acc = -pl.biharmonic_apply(y.u, dom)
        if self.model.kind != "linear":
            acc -= pl.nonlinear_force(self.model, y.u, dom)
        if self.model.damping_k:
            acc -= self.model.damping_k * y.v
        if self.coupled:
            acc += fl.restrict_plate(fl.trace_gamma(y.psi), fd)
        dy.v[...] = pl.clamp(acc)
        dy.u[...] = pl.clamp(dy.u)

        dY[-2] = self.leak_rate(y, ux)
        dY[-1] = self.sponge_rate(y)
        return dY

    def leak_rate(self, y: CoupledState, ux=None) -> float:
        if not self.coupled or ux is None or not self.params.U:
            return 0.0
        g = fl.restrict_plate(fl.trace_gamma(y.psi), self.fd)
        return self.params.U * self.fd.face_area * float(np.sum(ux * g))

    def sponge_rate(self, y: CoupledState) -> float:
        if not self.sponge:
            return 0.0
        return fl.sponge_power(y.psi, self.fd)

    def downwash_of(self, t, y: CoupledState):
        if not self.coupled:
            return np.zeros(self.fd.face_shape)
        ux = self._ux(t, y.u)
        return fl.downwash(y.v, 0.0 if ux is None else ux, self.params.U, self.fd)


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    times: np.ndarray
    dt: float
    ledger: list
    boundary: dict
    states: list
    state_times: list
    traces: Optional[np.ndarray] = None
    trace_times: Optional[np.ndarray] = None
    blowup: Optional[dg.BlowupRecord] = None
    y0_norm: float = 0.0

    @property
    def blew_up(self):
        return self.blowup is not None


class _Recorder:
    def __init__(self, system: CoupledSystem, y0: CoupledState):
        self.sys = system
        fd = system.fd
        mu = system.params.mu
        self.mu = mu
        e_pl, e_fl, e_tot = dg.energies(y0, system.model, fd, mu)
        self.E0 = e_tot
        self.S0 = dg.subsonic_energy(y0, system.params.U, system.model, fd, mu)
        self.ledger = []
        self.boundary = {"trace_hm12_sq": [], "trace_l2_sq": [], "flux_l2_sq": [], "leak_rate": [], "sponge_rate": []}

    def record(self, t, Y):
        s = self.sys
        fd, U = s.fd, s.params.U
        y = s.state_view(Y)
        psi2, grad2, phi2, _, psidx = fl.energy_terms(y.phi, y.psi, fd)
        e_pl = dg.plate_energy(y.u, y.v, s.model, fd.plate)
        e_fl = 0.5 * (psi2 + grad2 + self.mu * phi2)
        e_tot = e_pl + e_fl
        e1 = 0.5 * (psi2 - 2 * U * psidx + grad2 + self.mu * phi2)
        e_int = dg.interactive_energy(y, U, fd)
        lap = pl.laplacian_clamped(y.u, fd.plate)
        ynorm2 = (psi2 + grad2 + self.mu * phi2 + float(pl.l2_inner(lap, lap, fd.plate))
                  + float(pl.l2_inner(y.v, y.v, fd.plate)))
        leak, sponge = float(Y[-2]), float(Y[-1])
        self.ledger.append(dg.EnergyLedger(
            t=float(t), E_pl=e_pl, E_fl=e_fl, E_total=e_tot, E1_fl=e1, E_int=e_int,
            leak_integral=leak, sponge_loss=sponge,
            residual_supersonic=e_tot + leak + sponge - self.E0,
            residual_subsonic=(e1 + e_pl + e_int) - self.S0,
            y_norm=float(np.sqrt(max(ynorm2, 0.0))) if np.isfinite(ynorm2) else float("inf")))
        g = fl.trace_gamma(y.psi)
        d = s.downwash_of(t, y)
        self.boundary["trace_hm12_sq"].append(float(sobolev_trace_norm(g, -0.5, fd.hx, fd.hy) ** 2))
        self.boundary["trace_l2_sq"].append(fl.face_inner(g, g, fd))
        self.boundary["flux_l2_sq"].append(fl.face_inner(d, d, fd))
        self.boundary["leak_rate"].append(s.leak_rate(y, s._ux(t, y.u)))
        self.boundary["sponge_rate"].append(s.sponge_rate(y))
        return self.ledger[-1].y_norm


def integrate_system(system: CoupledSystem, y0: CoupledState, T: float, dt: float, stride: int = 0,
                     trace_stride: int = 0, progress: Optional[Callable] = None) -> Trajectory:
    """RK4 over ``[0, T]`` with ``round(T/dt)`` uniform steps (dt adjusted to land on T).

    ``stride`` > 0 stores every ``stride``-th state (the last one always);
    ``trace_stride`` > 0 stores ``gamma[psi]`` fields.
    """
    if not T > 0:
        raise ConfigurationError("T must be positive")
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    Y = np.concatenate([y0.to_flat(), [0.0, 0.0]])
    rec = _Recorder(system, y0)
    y0n = rec.record(0.0, Y)
    thr = dg.blowup_threshold(y0n)
    times = [0.0]
    states, stimes = [], []
    traces, ttimes = [], []

    def keep(i, t):
        if stride and (i % stride == 0 or i == steps):
            states.append(system.state_view(Y.copy()).copy())
            stimes.append(t)
        if trace_stride and i % trace_stride == 0:
            traces.append(fl.trace_gamma(system.state_view(Y).psi).copy())
            ttimes.append(t)

    keep(0, 0.0)
    blow = None
    stepper = _RK4(Y.size)
    for i in range(1, steps + 1):
        t0 = (i - 1) * dt
        with np.errstate(over="ignore", invalid="ignore"):
            stepper.step(Y, dt, system.rhs, t0)
        t = i * dt
        n = rec.record(t, Y)
        times.append(t)
        keep(i, t)
        if progress is not None:
            progress(i, steps)
        if not np.isfinite(n) or n > thr:
            tab = dg.ledger_table(rec.ledger)
            blow = dg.BlowupRecord(t, n, thr, dg.growth_rate(tab["t"], tab["y_norm"]))
            if stride and (not stimes or stimes[-1] != t):
                states.append(system.state_view(Y.copy()).copy())
                stimes.append(t)
            break
    return Trajectory(np.array(times), dt, rec.ledger, {k: np.array(v) for k, v in rec.boundary.items()},
                      states, stimes, np.array(traces) if traces else None,
                      np.array(ttimes) if ttimes else None, blow, y0n)


def integrate(sc, **kw) -> Trajectory:
    """Run a :class:`panelflow.config.Scenario`."""
    return integrate_system(sc.system(), sc.initial_state(), sc.T, sc.resolved_dt(), stride=sc.stride, **kw)


# ---------------------------------------------------------------------------
# Picard / variation of parameters

class _HermiteForcing:
    """Cubic Hermite ``ubar_x(t)`` from nodal ``u_x`` and ``v_x`` samples on a uniform grid."""

    def __init__(self, ux, vx, dt):
        self.ux, self.vx, self.dt = ux, vx, dt

    def __call__(self, t):
        n = self.ux.shape[0] - 1
        i = min(max(int(np.floor(t / self.dt + 1e-9)), 0), n - 1)
        s = t / self.dt - i
        if abs(s) < 1e-12:
            return self.ux[i]
        if abs(s - 1) < 1e-12:
            return self.ux[i + 1]
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return (h00 * self.ux[i] + h10 * self.dt * self.vx[i]
                + h01 * self.ux[i + 1] + h11 * self.dt * self.vx[i + 1])


@dataclass
class PicardResult:
    trajectory: Trajectory
    diffs: list              # |y^{k+1} - y^k|_{C([0,T];Y)}
    q: list                  # diffs[k] / diffs[k-1]
    converged: bool
    contracting: bool
    residual: float          # relative re-substitution residual of the last iterate
    iterations: int


def _sup_y_diff(a, b, fd, mu):
    from .operators import y_norm
    return max(y_norm(x - y, fd, mu) for x, y in zip(a, b))


def picard_solve(system: CoupledSystem, y0: CoupledState, T: float, dt: float, max_iter: int = 30,
                 tol: float = 1e-10, stride: int = 1) -> PicardResult:
    """Iterate ``y^{k+1}(t) = e^{AA t} y0 + int_0^t e^{AA(t-s)} PP# u^k(s) ds``.

    Each iterate is the RK4 solution of the inhomogeneous problem
    ``y' = AA y + PP# ubar`` with ``ubar = u^k`` (cubic Hermite in time between
    steps), which is the variation-of-parameters formula evaluated with the
    group propagated by the same RK4 steps.  Linear, sponge-free systems only.
    """
    if system.model.kind != "linear" or system.sponge:
        raise ConfigurationError("picard_solve needs a linear plate and the sponge off")
    if max_iter < 1:
        raise ConfigurationError("max_iter must be >= 1")
    fd, mu = system.fd, system.params.mu
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    dom = fd.plate
    zero = np.zeros((steps + 1,) + dom.shape)
    forcing = _HermiteForcing(zero, zero, dt)

    prev = None
    diffs, q = [], []
    converged, contracting = False, True
    above = 0
    traj = None
    for k in range(max_iter + 1):
        sys_k = replace(system, forcing=forcing, perturbation=True)
        traj = _integrate_all(sys_k, y0, T, dt, steps, stride)
        if prev is not None:
            dk = _sup_y_diff(traj.states, prev.states, fd, mu)
            diffs.append(dk)
            if len(diffs) > 1:
                qk = diffs[-1] / diffs[-2] if diffs[-2] > 0 else 0.0
                q.append(qk)
                above = above + 1 if qk >= 1 else 0
                if above >= 3:
                    contracting = False
                    break
            ref = max(_sup_norm(traj.states, fd, mu), 1e-300)
            if dk <= tol * ref:
                converged = True
                break
        prev = traj
        # next forcing from this iterate's plate displacement and velocity
        forcing = _HermiteForcing(pl.dx_zero_extended(traj.plate_u, dom),
                                  pl.dx_zero_extended(traj.plate_v, dom), dt)
    ref = max(_sup_norm(traj.states, fd, mu), 1e-300)
    residual = diffs[-1] / ref if diffs else 0.0
    return PicardResult(traj, diffs, q, converged, contracting, residual, len(diffs))


def _sup_norm(states, fd, mu):
    from .operators import y_norm
    return max(y_norm(s, fd, mu) for s in states)


def _integrate_all(system, y0, T, dt, steps, stride):
    """Integrate and keep every step's plate fields (for the next forcing) and strided full states."""
    Y = np.concatenate([y0.to_flat(), [0.0, 0.0]])
    rec = _Recorder(system, y0)
    rec.record(0.0, Y)
    us, vs = [y0.u.copy()], [y0.v.copy()]
    states, stimes = [y0.copy()], [0.0]
    stepper = _RK4(Y.size)
    for i in range(1, steps + 1):
        stepper.step(Y, dt, system.rhs, (i - 1) * dt)
        rec.record(i * dt, Y)
        y = system.state_view(Y)
        us.append(y.u.copy())
        vs.append(y.v.copy())
        if i % stride == 0 or i == steps:
            states.append(y.copy())
            stimes.append(i * dt)
    tr = Trajectory(np.arange(steps + 1) * dt, dt, rec.ledger,
                    {k: np.array(v) for k, v in rec.boundary.items()}, states, stimes)
    tr.plate_u = np.array(us)
    tr.plate_v = np.array(vs)
    return tr
