"""Energies, energy-relation residuals and blow-up monitoring."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import flow as fl
from . import plate as pl
from .flow import FlowDomain
from .operators import CoupledState
from .plate import PlateModel

BLOWUP_FACTOR = 1e8


@dataclass(frozen=True)
class EnergyLedger:
    t: float
    E_pl: float
    E_fl: float
    E_total: float
    E1_fl: float
    E_int: float
    leak_integral: float
    sponge_loss: float
    residual_supersonic: float
    residual_subsonic: float
    y_norm: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return [getattr(self, c) for c in self.columns()]


def ledger_table(ledger) -> dict:
    """Column arrays from a sequence of :class:`EnergyLedger` rows."""
    return {c: np.array([getattr(r, c) for r in ledger]) for c in EnergyLedger.columns()}


# ---------------------------------------------------------------------------
# energies

def plate_energy(u, v, model: PlateModel, dom) -> float:
    return float(0.5 * (pl.l2_inner(v, v, dom) + pl.laplacian_norm_sq(u, dom)) + pl.potential(model, u, dom))


def energies(y: CoupledState, model: PlateModel, fd: FlowDomain, mu: float = 0.0):
    """``(E_pl, E_fl, E_total)``; ``E_fl`` carries ``mu/2 |phi|^2`` only when ``mu > 0``."""
    psi2, grad2, phi2, _, _ = fl.energy_terms(y.phi, y.psi, fd)
    e_fl = 0.5 * (psi2 + grad2 + mu * phi2)
    e_pl = plate_energy(y.u, y.v, model, fd.plate)
    return e_pl, e_fl, e_pl + e_fl


def interactive_energy(y: CoupledState, U: float, fd: FlowDomain) -> float:
    """``E_int = U <gamma[phi], u_x>`` on the face."""
    ux = pl.dx_zero_extended(y.u, fd.plate)
    return U * fd.face_area * float(np.sum(fl.restrict_plate(fl.trace_gamma(y.phi), fd) * ux))


def subsonic_flow_energy(y: CoupledState, U: float, fd: FlowDomain, mu: float = 0.0) -> float:
    """``E1_fl = 1/2 (|phi_t|^2 + |grad phi|^2 - U^2 |phi_x|^2)`` with ``phi_t = psi - U phi_x``."""
    psi2, grad2, phi2, _, psidx = fl.energy_terms(y.phi, y.psi, fd)
    return 0.5 * (psi2 - 2 * U * psidx + grad2 + mu * phi2)


def subsonic_energy(y: CoupledState, U: float, model: PlateModel, fd: FlowDomain, mu: float = 0.0) -> float:
    """``E1_fl + E_pl + E_int``; conserved for ``U < 1`` without sponge or damping."""
    return (subsonic_flow_energy(y, U, fd, mu) + plate_energy(y.u, y.v, model, fd.plate)
            + interactive_energy(y, U, fd))


def sign_witness(fd: FlowDomain, U: float = 2.0, k: Optional[float] = None, width: float = 0.25) -> CoupledState:
    """Flow state with ``E1_fl < 0 <= E_fl`` for ``U > 1``.

    ``phi = sin(k x) b(x, y, z)`` with a smooth bump ``b`` and ``phi_t = 0``,
    i.e. ``psi = U phi_x``.  Then ``E1_fl = 1/2(|grad phi|^2 - U^2 |phi_x|^2)``,
    which is negative once ``k`` dominates the bump's own gradients.
    """
    X, Y, Z = fd.coords()
    if k is None:
        k = 0.25 * np.pi / fd.hx      # eight points per wavelength: well resolved by D
    bump = np.exp(-(X ** 2 + Y ** 2) / width ** 2 - Z ** 2 / (4 * width) ** 2)
    phi = np.sin(k * X) * bump
    y = CoupledState.zeros(fd)
    y.flow.phi[...] = phi
    y.flow.psi[...] = U * fl.dx_periodic(phi, fd.hx)
    return y


# ---------------------------------------------------------------------------
# residual series

def energy_relation_residual(traj, method: str = "ledger") -> np.ndarray:
    """``E(t) + U int <u_x, gamma psi> (+ sponge loss) - E(0)`` per step.

    ``method="ledger"`` uses the leak integrated alongside the state;
    ``"trapezoid"`` re-integrates the recorded leak-rate series.
    """
    tab = ledger_table(traj.ledger)
    if method == "ledger":
        return tab["residual_supersonic"]
    if method != "trapezoid":
        raise ValueError(f"unknown method {method!r}")
    rate = np.asarray(traj.boundary["leak_rate"]) + np.asarray(traj.boundary["sponge_rate"])
    t = tab["t"]
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (rate[1:] + rate[:-1]))])
    return tab["E_total"] + integral - tab["E_total"][0]


def inhom_energy_identity_residual(traj) -> np.ndarray:
    """``|y(t)|_Y^2 - |y(0)|_Y^2 + 2 U int (ubar_x, gamma psi)`` for a forced linear run.

    The Y-norm is the mu-inclusive one of the run; the forcing ``ubar`` is the
    prescribed displacement the run was driven with, so its pairing is the
    ledger's leak integral.
    """
    tab = ledger_table(traj.ledger)
    return tab["y_norm"] ** 2 - tab["y_norm"][0] ** 2 + 2.0 * (tab["leak_integral"] + tab["sponge_loss"])


# ---------------------------------------------------------------------------
# blow-up

@dataclass(frozen=True)
class BlowupRecord:
    t: float
    y_norm: float
    threshold: float
    growth_rate: float   # fitted exponential rate of |y|_Y over the recorded tail


def blowup_threshold(y0_norm: float) -> float:
    return BLOWUP_FACTOR * (1.0 + y0_norm)


def growth_rate(t, norms) -> float:
    """Least-squares slope of ``log |y|`` over the last half of the series."""
    t, n = np.asarray(t, float), np.asarray(norms, float)
    ok = np.isfinite(n) & (n > 0)
    t, n = t[ok], n[ok]
    if t.size < 3:
        return float("nan")
    tail = slice(t.size // 2, None)
    return float(np.polyfit(t[tail], np.log(n[tail]), 1)[0])


def blowup_monitor(traj, y0_norm: Optional[float] = None) -> Optional[BlowupRecord]:
    """First time ``|y|_Y`` exceeds ``1e8 (1 + |y0|_Y)`` (or turns non-finite)."""
    tab = ledger_table(traj.ledger)
    norms = tab["y_norm"]
    if y0_norm is None:
        y0_norm = norms[0]
    thr = blowup_threshold(y0_norm)
    bad = np.flatnonzero(~np.isfinite(norms) | (norms > thr))
    if bad.size == 0:
        return None
    i = bad[0]
    return BlowupRecord(float(tab["t"][i]), float(norms[i]), thr, growth_rate(tab["t"][:i + 1], norms[:i + 1]))
