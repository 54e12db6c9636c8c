"""Command-line harness.

Subcommands::

    ubopt solve     --scenario cfg --scheme ID [--out DIR] [--no-plot]
    ubopt sweep     --spec spec.cfg --out DIR [--no-plot]
    ubopt ehcompare --scenario cfg --out FILE [--no-plot]

Exit codes: 0 success, 2 infeasible instance (demand unreachable),
1 usage or parse error.  ``UBOPT_THREADS`` caps sweep workers.
"""

from __future__ import annotations

import argparse
import os
import sys

# keep BLAS pools quiet and runs reproducible before numpy loads
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from . import plotting, sweeps                       # noqa: E402
from .driver import Scheme, solve                    # noqa: E402
from .scenario import ScenarioError, default_scenario, load_scenario  # noqa: E402

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ubopt",
        description="Throughput optimizer for a cache-assisted UAV backscatter relay")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance and dump the solution")
    p_solve.add_argument("--scenario", required=True)
    p_solve.add_argument("--scheme", required=True,
                         choices=[s.value for s in Scheme])
    p_solve.add_argument("--out", default=".")
    p_solve.add_argument("--no-plot", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep from a spec file")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--no-plot", action="store_true")

    p_eh = sub.add_parser("ehcompare", help="tabulate both harvester models")
    p_eh.add_argument("--scenario", default=None)
    p_eh.add_argument("--out", required=True)
    p_eh.add_argument("--no-plot", action="store_true")
    return parser


def _cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    scheme = Scheme(args.scheme)
    os.makedirs(args.out, exist_ok=True)
    traj, alloc, report = solve(sc, scheme)
    traj_csv = os.path.join(args.out, f"trajectory_{scheme.value}.csv")
    sweeps.dump_trajectory(sc, scheme, traj_csv, solution=(traj, alloc, report))
    report_path = os.path.join(args.out, f"report_{scheme.value}.csv")
    sweeps.write_csv(report_path,
                     ["key", "value"],
                     [["scheme", scheme.value],
                      ["objective_bits", report.objective_bits],
                      ["throughput_bps", report.objective_bits / sc.T],
                      ["iterations", report.iterations],
                      ["converged", report.converged],
                      ["demand_met", report.demand_met],
                      ["wall_time_s", report.wall_time]]
                     + [[f"residual_{k}", v]
                        for k, v in sorted(report.constraint_residuals.items())])
    if not args.no_plot:
        plotting.render_trajectory_csv(
            traj_csv, traj_csv.replace(".csv", ".png"),
            landmarks={"source": sc.w_s, "destination": sc.w_d})
    print(f"objective_bits={report.objective_bits:.6g} converged={report.converged} "
          f"demand_met={report.demand_met}")
    print(f"wrote {traj_csv} and {report_path}")
    return EXIT_OK if report.demand_met else EXIT_INFEASIBLE


def _cmd_sweep(args) -> int:
    spec = sweeps.SweepSpec.from_file(args.spec)
    csv_path = sweeps.run_sweep(spec, args.out)
    if not args.no_plot:
        plotting.render_sweep_csv(csv_path, csv_path.replace(".csv", ".png"))
    print(f"wrote {csv_path}")
    with open(csv_path) as fh:
        demand_ok = "demand_met" not in fh.readline() or "false" not in fh.read()
    return EXIT_OK if demand_ok else EXIT_INFEASIBLE


def _cmd_ehcompare(args) -> int:
    sc = load_scenario(args.scenario) if args.scenario else default_scenario()
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    sweeps.eh_compare(sweeps.default_power_grid(), sc, args.out)
    if not args.no_plot:
        plotting.render_ehcompare_csv(args.out, str(args.out).replace(".csv", ".png"))
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "ehcompare":
            return _cmd_ehcompare(args)
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
