"""Reference-level runs behind the long acceptance checks, with a summary line each.

    python scripts/reference_runs.py --level 2 --T 10

Runs: U=2 linear (standard), U=0.5 linear without sponge (subsonic
conservation), U=2 von Karman with amplitude 0.5, and the destabilized
Kirchhoff plate.  Use ``panelflow run`` for the CSV outputs of a single scenario.
"""
import argparse
import time

import numpy as np

from panelflow import diagnostics as dg
from panelflow import plate as pl
from panelflow.config import level_scenario
from panelflow.timestep import integrate
from panelflow.trace import trace_estimate_report


def scenarios(level, T):
    lam = pl.lambda1(level_scenario(level).plate_domain())
    return {
        "standard": level_scenario(level, run={"T": T}),
        "subsonic": level_scenario(level, flow={"U": 0.5, "sponge": False}, run={"T": T}),
        "vonkarman": level_scenario(level, plate={"model": "vonkarman"}, ic={"amplitude": 0.5}, run={"T": T}),
        "kirchhoff_unstable": level_scenario(level, plate={"model": "kirchhoff", "law": "linear",
                                                           "coeff": -10 * lam}, run={"T": min(T, 2.0)}),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--level", type=int, default=2)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--only", nargs="*", default=None)
    a = ap.parse_args()
    for name, sc in scenarios(a.level, a.T).items():
        if a.only and name not in a.only:
            continue
        t0 = time.perf_counter()
        tr = integrate(sc)
        tab = dg.ledger_table(tr.ledger)
        S = tab["E1_fl"] + tab["E_pl"] + tab["E_int"]
        print(f"{name}: steps={len(tr.times) - 1} dt={tr.dt:.3e} "
              f"max|res_sup|/E0={np.max(np.abs(tab['residual_supersonic'])) / abs(tab['E_total'][0]):.2e} "
              f"max|res_sub|/S0={np.max(np.abs(tab['residual_subsonic'])) / abs(S[0]):.2e} "
              f"max|y|/|y0|={np.max(tab['y_norm']) / tab['y_norm'][0]:.3f} "
              f"trace_ratio={trace_estimate_report(tr).ratio:.4f} blowup={tr.blew_up} "
              f"seconds={time.perf_counter() - t0:.0f}", flush=True)


if __name__ == "__main__":
    main()
