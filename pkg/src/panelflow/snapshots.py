"""Binary snapshots and CSV outputs.

Snapshot layout (little-endian): a 64-byte header ``b"PNFL"``, ``uint32``
version, ``uint32`` flow ``nx, ny, nz``, ``uint32`` plate ``nx, ny``,
``float64`` time, zero padding; then ``phi, psi`` (flow grid) and ``u, v``
(plate grid) as row-major ``<f8``.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .diagnostics import EnergyLedger
from .flow import FlowState
from .operators import CoupledState

MAGIC = b"PNFL"
VERSION = 1
HEADER = struct.Struct("<4sI5Id")
HEADER_SIZE = 64


def write_snapshot(path, y: CoupledState, t: float) -> None:
    nx, ny, nz = y.phi.shape
    px, py = y.u.shape
    head = HEADER.pack(MAGIC, VERSION, nx, ny, nz, px, py, float(t))
    head += b"\0" * (HEADER_SIZE - len(head))
    with open(path, "wb") as fh:
        fh.write(head)
        for a in (y.phi, y.psi, y.u, y.v):
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_snapshot(path):
    """Return ``(CoupledState, t)``."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, nx, ny, nz, px, py, t = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a PNFL snapshot")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    nf, npl = nx * ny * nz, px * py
    expected = HEADER_SIZE + 8 * (2 * nf + 2 * npl)
    if len(raw) != expected:
        raise ValueError(f"{path}: size {len(raw)} != expected {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).astype(float)
    phi = data[:nf].reshape(nx, ny, nz)
    psi = data[nf:2 * nf].reshape(nx, ny, nz)
    u = data[2 * nf:2 * nf + npl].reshape(px, py)
    v = data[2 * nf + npl:].reshape(px, py)
    return CoupledState(FlowState(phi, psi), u, v), t


def _fmt(x):
    return repr(float(x))


def write_ledger_csv(path, ledger) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + EnergyLedger.columns())
        for i, row in enumerate(ledger):
            w.writerow([i] + [_fmt(v) for v in row.row()])


TRACE_COLUMNS = ["step", "t", "gamma_psi_hm12", "gamma_psi_l2", "dnu_phi_l2"]


def write_traces_csv(path, traj) -> None:
    b = traj.boundary
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i, t in enumerate(traj.times):
            w.writerow([i, _fmt(t), _fmt(np.sqrt(b["trace_hm12_sq"][i])), _fmt(np.sqrt(b["trace_l2_sq"][i])),
                        _fmt(np.sqrt(b["flux_l2_sq"][i]))])


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    return {h: np.array([float(r[i]) for r in rows[1:]]) for i, h in enumerate(head)}
