"""Command line front end.

Exit codes: 0 on success, 1 for bad input (flags, scenario or grid file
problems), 2 when a run or solve fails after validation passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gridfed.grid.model import GridFileError, ModelError
from gridfed.grid.netfile import parse_grid_file
from gridfed.orchestrator.run import SimulationError, run_scenario
from gridfed.orchestrator.scenario import ScenarioError, load_scenario
from gridfed.powerflow.newton import solve_transmission
from gridfed.powerflow.sweep import (
    PowerFlowError,
    head_from_boundary,
    solve_feeder,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="gridfed",
        description="Federated transmission and distribution Volt-VAR simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="execute a scenario and write output files")
    p_run.add_argument("scenario", help="scenario file path")
    p_run.add_argument("--mode", choices=("sim", "realtime"),
                       help="override the scenario's execution mode")
    p_run.add_argument("--seed", type=int, help="override the scenario's RNG seed")
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.add_argument("--tap", metavar="HOST:PORT",
                       help="stream every sent frame to a TCP listener")

    p_val = sub.add_parser("validate", help="check a scenario and all referenced files")
    p_val.add_argument("scenario", help="scenario file path")

    p_pf = sub.add_parser("powerflow", help="solve one grid file and print voltages")
    p_pf.add_argument("grid", help="grid file path")
    p_pf.add_argument("--base-mva", type=float, default=1.0,
                      help="power base in MVA (default: 1)")
    p_pf.add_argument("--head-vmag", type=float, default=1.0,
                      help="head voltage magnitude in pu (default: 1.0)")
    p_pf.add_argument("--head-angle", type=float, default=0.0,
                      help="head phase-a angle in degrees (default: 0)")
    p_pf.add_argument("--solver", choices=("auto", "sweep", "newton"),
                      default="auto",
                      help="solver choice; auto picks newton for single-phase "
                           "bulk models with generators")
    return parser


def _cmd_run(args) -> int:
    tap = None
    if args.tap:
        host, sep, port = args.tap.rpartition(":")
        if not sep or not host:
            print(f"gridfed: bad --tap address: {args.tap!r}", file=sys.stderr)
            return 1
        try:
            tap = (host, int(port))
        except ValueError:
            print(f"gridfed: bad --tap port: {port!r}", file=sys.stderr)
            return 1

    try:
        loaded = load_scenario(args.scenario)
    except (ScenarioError, GridFileError, ModelError, OSError) as exc:
        print(f"gridfed: {exc}", file=sys.stderr)
        return 1

    try:
        summary = run_scenario(loaded, args.out, mode=args.mode,
                               seed=args.seed, tap=tap)
    except (SimulationError, PowerFlowError, OSError) as exc:
        print(f"gridfed: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    print(f"wrote {out / 'telemetry.csv'}")
    print(f"wrote {out / 'events.csv'}")
    print(f"wrote {out / 'summary.txt'}")
    print(f"intervals={summary['intervals']} "
          f"band_violations={summary['band_violation_count']} "
          f"max_abs_tracking_error_kvar={summary['max_abs_tracking_error_kvar']:.6f}")
    return 0


def _cmd_validate(args) -> int:
    try:
        loaded = load_scenario(args.scenario)
    except (ScenarioError, GridFileError, ModelError, OSError) as exc:
        print(f"gridfed: {exc}", file=sys.stderr)
        return 1
    spec = loaded.spec
    n_feds = len(spec.federate_names())
    print(f"ok: {n_feds} federates, {len(spec.links)} links, "
          f"duration {spec.duration_s:.0f}s")
    return 0


def _cmd_powerflow(args) -> int:
    try:
        text = Path(args.grid).read_text(encoding="utf-8")
        model = parse_grid_file(text, base_mva=args.base_mva)
    except (GridFileError, ModelError, OSError) as exc:
        print(f"gridfed: {exc}", file=sys.stderr)
        return 1

    solver = args.solver
    if solver == "auto":
        single_phase = all(b.phases == "a" for b in model.buses)
        solver = "newton" if single_phase and model.generators else "sweep"

    import cmath
    import math

    try:
        if solver == "newton":
            sol = solve_transmission(model, boundary_loads={})
            state = sol.state
        else:
            head = head_from_boundary(args.head_vmag, args.head_angle)
            state = solve_feeder(model, head)
        if state is None or not state.converged:
            print("gridfed: power flow did not converge", file=sys.stderr)
            return 2
    except (PowerFlowError, ModelError) as exc:
        print(f"gridfed: {exc}", file=sys.stderr)
        return 2

    for bus in model.buses:
        for ph in bus.phases:
            v = state.v(bus.id, ph)
            print(f"{bus.id} {ph} {abs(v):.6f} {math.degrees(cmath.phase(v)):.6f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_powerflow(args)


if __name__ == "__main__":
    sys.exit(main())
