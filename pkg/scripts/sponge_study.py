"""Energy left in the box after a centred pulse has had time to leave it.

    python scripts/sponge_study.py --widths 4 8 16 --strengths 10 20 40

Decoupled flow, U=0; the remaining fraction of the initial flow energy
measures what the sponge shell reflects back.  ``--nx`` varies the lateral
box size at fixed spacing (a box-size check).
"""
import argparse
import time

import numpy as np

from panelflow.flow import FlowDomain, FlowParams
from panelflow.operators import CoupledState
from panelflow.plate import PlateDomain, PlateModel
from panelflow.timestep import CoupledSystem, cfl_dt, integrate_system


def remaining_fraction(width, strength, nx=64, nz=40, T=8.0, pulse=0.2):
    pd = PlateDomain(9, 9)
    fd = FlowDomain.around(pd, nx, nx, nz, sponge_width=width, sponge_strength=strength)
    system = CoupledSystem(fd, FlowParams(0.0, 0.0), PlateModel("linear"), coupled=False, sponge=True)
    X, Y, Z = fd.coords()
    y = CoupledState.zeros(fd)
    y.flow.psi[...] = np.exp(-(X ** 2 + Y ** 2 + (Z - 1.0) ** 2) / (2 * pulse ** 2))
    tr = integrate_system(system, y, T, cfl_dt(fd, 0.0))
    return tr.ledger[-1].E_fl / tr.ledger[0].E_fl


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--widths", type=int, nargs="+", default=[8, 16])
    ap.add_argument("--strengths", type=float, nargs="+", default=[20.0])
    ap.add_argument("--nx", type=int, nargs="+", default=[64])
    ap.add_argument("--T", type=float, default=8.0)
    a = ap.parse_args()
    print("nx width strength remaining_fraction seconds")
    for nx in a.nx:
        for w in a.widths:
            for s in a.strengths:
                t0 = time.perf_counter()
                f = remaining_fraction(w, s, nx=nx, T=a.T)
                print(f"{nx} {w} {s:g} {f:.4e} {time.perf_counter() - t0:.0f}", flush=True)


if __name__ == "__main__":
    main()
