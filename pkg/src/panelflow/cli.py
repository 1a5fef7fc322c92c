"""Command line: ``panelflow <subcommand> ...``.

Exit codes: 0 success, 2 blow-up detected, 1 error or failed check.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import checks
from . import diagnostics as dg
from .config import Scenario, parse_scenario
from .errors import PanelflowError
from .snapshots import write_ledger_csv, write_snapshot, write_traces_csv
from .timestep import CoupledSystem, integrate, picard_solve
from .trace import bound_check, trace_estimate_report, wedge_check

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2


def run(sc: Scenario, outdir=None, quiet=True) -> int:
    """Integrate ``sc`` and write ledger.csv, traces.csv, snapshots and report.txt."""
    out = Path(outdir if outdir is not None else sc.run.output)
    out.mkdir(parents=True, exist_ok=True)
    traj = integrate(sc)
    write_ledger_csv(out / "ledger.csv", traj.ledger)
    write_traces_csv(out / "traces.csv", traj)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    steps = np.rint(np.asarray(traj.state_times) / traj.dt).astype(int) if traj.state_times else []
    for y, t, i in zip(traj.states, traj.state_times, steps):
        write_snapshot(snap_dir / f"snap_{i:07d}.pnfl", y, t)
    rep = trace_estimate_report(traj)
    lines = [f"steps={len(traj.times) - 1}", f"dt={traj.dt!r}", f"T={float(traj.times[-1])!r}"]
    lines += rep.lines()
    tab = dg.ledger_table(traj.ledger)
    lines.append(f"max_abs_residual_supersonic={np.max(np.abs(tab['residual_supersonic'])):.10e}")
    lines.append(f"max_abs_residual_subsonic={np.max(np.abs(tab['residual_subsonic'])):.10e}")
    if traj.blowup:
        b = traj.blowup
        lines.append(f"blowup=yes t={b.t!r} y_norm={b.y_norm:.6e} threshold={b.threshold:.6e} "
                     f"growth_rate={b.growth_rate:.6e}")
    else:
        lines.append("blowup=no")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    if not quiet:
        print("\n".join(lines))
    return EXIT_BLOWUP if traj.blowup else EXIT_OK


# ---------------------------------------------------------------------------
# subcommands

def _cmd_run(a):
    return run(parse_scenario(a.scenario), a.output, quiet=False)


def _cmd_multiplier(a):
    r = max(bound_check(a.samples, a.seed), wedge_check())
    print(f"{'PASS' if r <= 1.0 else 'FAIL'} max_ratio={r:.6f}")
    return EXIT_OK if r <= 1.0 else EXIT_ERROR


def _cmd_generator(a):
    sc = parse_scenario(a.scenario)
    mu = sc.flow.mu if sc.flow.mu > 0 else 1.0
    rep = checks.generator_suite(sc.flow_domain(), sc.flow.U, mu, a.pairs, a.adjoint_pairs, sc.run.seed)
    ok = rep.passed()
    print(f"{'PASS' if ok else 'FAIL'} skewness={max(rep.skewness, rep.pair_skewness):.3e} "
          f"adjoint={rep.adjoint:.3e}")
    return EXIT_OK if ok else EXIT_ERROR


def _cmd_resolvent(a):
    sc = parse_scenario(a.scenario)
    mu = sc.flow.mu if sc.flow.mu > 0 else 1.0
    rep = checks.resolvent_suite(sc.flow_domain(), sc.flow.U, (a.lam,), a.samples, mu, sc.run.seed)
    ok = rep.max_bound_ratio <= 1.0 + 1e-12 and rep.max_identity_error <= 1e-8
    print(f"{'PASS' if ok else 'FAIL'} lambda={a.lam:g} bound_ratio={rep.max_bound_ratio:.6f} "
          f"identity_error={rep.max_identity_error:.3e} residual={rep.max_residual:.3e}")
    return EXIT_OK if ok else EXIT_ERROR


def _cmd_picard(a):
    sc = parse_scenario(a.scenario)
    system = CoupledSystem(sc.flow_domain(), sc.flow_params(), sc.plate_model(), coupled=True, sponge=False)
    if system.model.kind != "linear":
        system = dataclasses.replace(system, model=dataclasses.replace(system.model, kind="linear"))
    T = a.T if a.T else sc.T
    res = picard_solve(system, sc.initial_state(), T, sc.resolved_dt(), max_iter=a.iters, tol=a.tol)
    for k, d in enumerate(res.diffs, 1):
        q = res.q[k - 2] if k >= 2 else float("nan")
        print(f"iter={k} diff={d:.6e} q={q:.4f}")
    status = "converged" if res.converged else ("non-contracting" if not res.contracting else "max-iter")
    print(f"{status} residual={res.residual:.3e}")
    return EXIT_OK if res.converged else EXIT_ERROR


def _cmd_convergence(a):
    sc = parse_scenario(a.scenario)
    rows = checks.convergence_table(sc, a.levels)
    print("level plate_n dt max_abs_residual ratio")
    for r in rows:
        print(f"{r.level} {r.plate_n} {r.dt:.6e} {r.max_residual:.6e} {r.ratio:.3f}")
    return EXIT_OK


def _cmd_gradcheck(a):
    sc = parse_scenario(a.scenario)
    res = checks.gradcheck_suite(sc.plate_domain(), a.samples, sc.run.seed)
    ok = all(v <= 1e-4 for v in res.values())
    print("model max_rel_err")
    for k, v in res.items():
        print(f"{k} {v:.3e}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_ERROR


def build_parser():
    p = argparse.ArgumentParser(prog="panelflow", description="Coupled supersonic flow / nonlinear plate lab.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    s = sub.add_parser("run", help="integrate a scenario and write outputs")
    s.add_argument("scenario")
    s.add_argument("--output", default=None, help="output directory (default: [run] output)")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("check-multiplier", help="sample the multiplier bound")
    s.add_argument("--samples", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=42)
    s.set_defaults(func=_cmd_multiplier)

    s = sub.add_parser("check-generator", help="skewness and Neumann adjoint identity")
    s.add_argument("scenario")
    s.add_argument("--pairs", type=int, default=100)
    s.add_argument("--adjoint-pairs", type=int, default=20)
    s.set_defaults(func=_cmd_generator)

    s = sub.add_parser("resolvent", help="resolvent a-priori bound (use a coarse scenario)")
    s.add_argument("scenario")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--samples", type=int, default=10)
    s.set_defaults(func=_cmd_resolvent)

    s = sub.add_parser("picard", help="variation-of-parameters iteration")
    s.add_argument("scenario")
    s.add_argument("--iters", type=int, default=30)
    s.add_argument("--T", type=float, default=None, help="horizon (default: [run] T)")
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=_cmd_picard)

    s = sub.add_parser("convergence", help="energy-relation residual under refinement")
    s.add_argument("scenario")
    s.add_argument("--levels", type=int, default=2)
    s.set_defaults(func=_cmd_convergence)

    s = sub.add_parser("gradcheck", help="f = Pi' finite-difference check for all models")
    s.add_argument("scenario")
    s.add_argument("--samples", type=int, default=10)
    s.set_defaults(func=_cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return a.func(a)
    except (PanelflowError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
