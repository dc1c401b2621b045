"""Command-line interface: scenario runs, planning, sweeps.

Exit codes distinguish failure classes: 2 for unparseable input (bad flags
or malformed JSON), 3 for scenario validation problems (a field names the
offense), 4 for planner infeasibility under hard access semantics. The
``CISLUNAR_CPD_TIME_LIMIT`` environment variable overrides the reflector
solver's wall-clock budget in seconds (trading reproducibility for latency).
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import geometry, pipeline
from .rcpd import InfeasibleAccessError
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_INFEASIBLE = 4


def _load(args: argparse.Namespace) -> Scenario:
    scn = load_scenario(args.scenario)
    trace = getattr(args, "visibility_trace", None)
    if trace:
        scn = replace(scn, visibility_mode="trace", visibility_trace=trace)
    limit = os.environ.get("CISLUNAR_CPD_TIME_LIMIT")
    if limit:
        scn = replace(scn, reflector=replace(scn.reflector,
                                             time_limit=float(limit)))
    return scn


def _cmd_propagate(args: argparse.Namespace) -> int:
    catalog = (geometry.load_orbit_catalog(args.catalog) if args.catalog
               else geometry.default_orbit_catalog())
    if args.orbit not in catalog:
        raise ScenarioError(f"unknown orbit {args.orbit!r}")
    state = geometry.Cr3bpState.from_vector(catalog[args.orbit])
    end = geometry.propagate(state, args.dt, args.step)
    c0 = geometry.jacobi_constant(state)
    c1 = geometry.jacobi_constant(end)
    print("# x\ty\tz\tvx\tvy\tvz\tjacobi\tjacobi_drift")
    vec = "\t".join(f"{v:.12e}" for v in end.vector())
    print(f"{vec}\t{c1:.12e}\t{abs(c1 - c0):.3e}")
    return EXIT_OK


def _cmd_visibility(args: argparse.Namespace) -> int:
    scn = _load(args)
    vis = pipeline.build_visibility(scn)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_visibility(out / "visibility_periods.tsv",
                              out / "visibility_superframes.tsv",
                              vis, scn.grid)
    print(f"wrote visibility tables under {out}")
    return EXIT_OK


def _cmd_plan_r(args: argparse.Namespace) -> int:
    scn = _load(args)
    vis = pipeline.build_visibility(scn)
    plan = pipeline.plan_reflector(scn, vis, args.scheme)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nodes = scn.nodes()
    pipeline.write_reflector_plan(out / f"rplan_{args.scheme}.tsv", plan,
                                  nodes)
    pipeline.write_deficit_report(out / f"deficits_{args.scheme}.tsv", plan,
                                  nodes)
    print(f"wrote reflector plan for {args.scheme} under {out}")
    return EXIT_OK


def _cmd_plan_p(args: argparse.Namespace) -> int:
    scn = _load(args)
    vis = pipeline.build_visibility(scn)
    rplan = pipeline.plan_reflector(scn, vis, args.r_scheme)
    records = pipeline.schedule_phased(scn, vis, rplan, args.p_scheme)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_phased_plan(
        out / f"pplan_{args.r_scheme}_{args.p_scheme}.tsv", records)
    print(f"wrote phased-array plan for {args.r_scheme}+{args.p_scheme} "
          f"under {out}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    scn = _load(args)
    runs = pipeline.run_scenario(scn)
    out = Path(args.out_dir)
    written = pipeline.write_run_outputs(out, scn, runs)
    print(f"wrote {len(written)} files under {out}")
    return EXIT_OK


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise ScenarioError(f"{flag} expects comma-separated integers") \
            from exc


def _sweep_cell(cell: tuple[Scenario, Path]) -> list[str]:
    scn, cell_dir = cell
    runs = pipeline.run_scenario(scn)
    pipeline.write_run_outputs(cell_dir, scn, runs)
    return (cell_dir / "metrics.tsv").read_text().splitlines()[1:]


def _cmd_sweep(args: argparse.Namespace) -> int:
    scn = _load(args)
    p_users = _parse_int_list(args.p_users, "--p-users") \
        if args.p_users else [len(scn.p_user_orbits)]
    r_users = _parse_int_list(args.r_users, "--r-users") \
        if args.r_users else [len(scn.r_user_orbits)]
    floors = _parse_int_list(args.gs_floor, "--gs-floor") \
        if args.gs_floor else [scn.reflector.gs_link_floor]

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = []
    for nr, np_, lg in itertools.product(r_users, p_users, floors):
        cell_scn = scn.with_population(r_users=nr, p_users=np_,
                                       gs_link_floor=lg)
        cell_scn = replace(cell_scn,
                           name=f"{scn.name}_ur{nr}_up{np_}_lg{lg}")
        cells.append((cell_scn, out / "cells" / cell_scn.name))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cell_rows = list(pool.map(_sweep_cell, cells))
    else:
        cell_rows = [_sweep_cell(cell) for cell in cells]

    lines = ["# scenario\tr_scheme\tp_scheme\tmetric\tvalue\tdelivered"
             "\tcensored"]
    for rows in cell_rows:
        lines.extend(rows)
    (out / "sweep_metrics.tsv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(cells)} sweep cells under {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cislunar-cpd",
        description="Contact plan design and evaluation for cislunar relay "
                    "constellations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="advance a catalog orbit")
    p.add_argument("--orbit", required=True)
    p.add_argument("--dt", type=float, required=True,
                   help="duration in nondimensional time units")
    p.add_argument("--step", type=float, default=geometry.DEFAULT_STEP)
    p.add_argument("--catalog")
    p.set_defaults(func=_cmd_propagate)

    def scenario_args(sp, trace: bool = True):
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--out-dir", required=True)
        if trace:
            sp.add_argument("--visibility-trace",
                            help="bypass geometry with an interval trace "
                                 "file")

    p = sub.add_parser("visibility", help="write visibility tables")
    scenario_args(p)
    p.set_defaults(func=_cmd_visibility)

    p = sub.add_parser("plan-r", help="plan the reflector topology")
    scenario_args(p)
    p.add_argument("--scheme", choices=("rcpd", "laapmm"), default="rcpd")
    p.set_defaults(func=_cmd_plan_r)

    p = sub.add_parser("plan-p", help="plan the phased-array topology")
    scenario_args(p)
    p.add_argument("--r-scheme", choices=("rcpd", "laapmm"), default="rcpd")
    p.add_argument("--p-scheme", choices=("pcpd", "dfcp"), default="pcpd")
    p.set_defaults(func=_cmd_plan_p)

    p = sub.add_parser("evaluate", help="run schemes and write metrics")
    scenario_args(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="grid over population sizes")
    scenario_args(p)
    p.add_argument("--p-users", help="comma list, e.g. 8,16,24,32")
    p.add_argument("--r-users", help="comma list, e.g. 2,4,8")
    p.add_argument("--gs-floor", help="comma list, e.g. 1,2")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: scenario file is not valid JSON: {exc}",
              file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except pipeline.PlanValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleAccessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
