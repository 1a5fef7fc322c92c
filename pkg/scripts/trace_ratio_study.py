"""Trace-estimate ratio of the U=2 run across grid levels.

    python scripts/trace_ratio_study.py --size 1 --levels 0 1 2
    python scripts/trace_ratio_study.py --size 4 --levels 0 1 2 3

``--size`` is the plate side; the flow box scales with it, so a larger plate
lowers the plate frequencies relative to the grid.
"""
import argparse
import time

from panelflow import level_scenario, integrate
from panelflow.trace import trace_estimate_report


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--U", type=float, default=2.0)
    ap.add_argument("--levels", type=int, nargs="+", default=[0, 1, 2])
    a = ap.parse_args()
    print("level plate_n dt ratio lhs efl0 flux_int seconds")
    for lev in a.levels:
        sc = level_scenario(lev, flow={"U": a.U}, plate={"lx": a.size, "ly": a.size}, run={"T": a.T})
        t0 = time.perf_counter()
        tr = integrate(sc)
        r = trace_estimate_report(tr)
        print(f"{lev} {sc.plate.nx} {tr.dt:.3e} {r.ratio:.4f} {r.lhs:.4e} {r.rhs_efl0:.4e} {r.rhs_flux:.4e} "
              f"{time.perf_counter() - t0:.0f}", flush=True)


if __name__ == "__main__":
    main()
