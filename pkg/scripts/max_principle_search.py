"""Adversarial search for negative maximum-principle margins.

    python scripts/max_principle_search.py --sizes 9 13 17 --trials 6

Minimizes ``margin(u) / |u(centre)|`` over interior nodal values with
Powell's method from random starts; the margin is 1-homogeneous, so the
normalization fixes the scale.
"""
import argparse

import numpy as np
from scipy.optimize import minimize

from panelflow.plate import PlateDomain, embed_interior, max_principle_margin


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[9, 13, 17])
    ap.add_argument("--trials", type=int, default=6)
    ap.add_argument("--maxfev", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    print("n best_normalized_margin")
    for n in a.sizes:
        dom = PlateDomain(n, n)
        m, c = n - 2, (n // 2, n // 2)

        def f(x):
            u = embed_interior(x.reshape(m, m))
            return float(max_principle_margin(u / max(abs(u[c]), 1e-12), dom))

        rng = np.random.default_rng(a.seed)
        best = min(minimize(f, rng.standard_normal(m * m), method="Powell",
                            options={"maxfev": a.maxfev, "xtol": 1e-6, "ftol": 1e-9}).fun
                   for _ in range(a.trials))
        print(f"{n} {best:.6e}", flush=True)


if __name__ == "__main__":
    main()
