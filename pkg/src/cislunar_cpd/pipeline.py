"""End-to-end orchestration: visibility, planners, evaluation, reports.

The flow per scheme combination is: visibility (sampled geometry, a trace
override, or synthetic full visibility) -> reflector plan -> per-superframe
partition -> phased-array schedule -> metrics. During the first
``switching_superframes`` of each period only reflector links carried over
unchanged from the previous period count toward the partition (terminals are
still slewing); the first period starts with its own links, terminals having
been aligned before the scenario starts.

Superframe schedules are memoised on (visibility graph, partition,
reflector pairs) so static stretches of the horizon cost one computation.
All outputs are plain tab-separated text with a one-line schema header and
fixed float formatting, so identical scenarios and seeds produce
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import baselines, geometry, metrics, pcpd, rcpd
from .core import (Node, PhasedArrayPlan, ReflectorPlan, TimeGrid,
                   TopologyPartition, VisibilitySet, ground_station_ids,
                   p_user_ids, partition_topology, r_user_ids,
                   satellite_ids, validate_reflector_plan)
from .metrics import MetricReport, SuperframeSchedule, TrafficModel
from .scenario import Scenario


class PlanValidationError(RuntimeError):
    """An emitted plan failed its validator; carries the violation list."""

    def __init__(self, scheme: str, violations: Sequence):
        self.violations = tuple(violations)
        lines = "; ".join(str(v) for v in violations[:5])
        super().__init__(f"{scheme} produced an invalid plan: {lines}")


@dataclass(frozen=True)
class SchemeRun:
    """One (reflector scheme, phased-array scheme) evaluation."""

    r_scheme: str
    p_scheme: str
    rplan: ReflectorPlan
    records: tuple[SuperframeSchedule, ...]
    report: MetricReport


def build_visibility(scn: Scenario) -> VisibilitySet:
    nodes = scn.nodes()
    if scn.visibility_mode == "full":
        return VisibilitySet.full(nodes, scn.grid)
    if scn.visibility_mode == "trace":
        return geometry.load_visibility_trace(scn.visibility_trace, nodes,
                                              scn.grid)
    return geometry.compute_visibility(nodes, scn.grid, scn.pointing,
                                       scn.orbit_states())


def plan_reflector(scn: Scenario, vis: VisibilitySet,
                   scheme: str) -> ReflectorPlan:
    nodes = scn.nodes()
    if scheme == "rcpd":
        plan = rcpd.plan_horizon(vis, nodes, scn.reflector)
    elif scheme == "laapmm":
        plan = baselines.laa_pmm_plan(vis, nodes, scn.reflector)
    else:
        raise ValueError(f"unknown reflector scheme {scheme!r}")
    violations = validate_reflector_plan(plan, vis, nodes)
    if violations:
        raise PlanValidationError(scheme, violations)
    return plan


def effective_reflector_topology(
        plan: ReflectorPlan, period: int, superframe: int, grid: TimeGrid,
        sat_ids: Sequence[int], gs_ids: Sequence[int],
) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...]]:
    """Live satellite-satellite pairs and directly grounded satellites.

    During switching superframes of periods after the first, only links
    present in both the previous and current period are live.
    """
    here = plan.links[period]
    if superframe < grid.switching_superframes and period > 0:
        live = here & plan.links[period - 1]
    else:
        live = here
    rl = tuple((i, j) for k, i in enumerate(sat_ids)
               for j in sat_ids[k + 1:] if live[i, j])
    grounded = tuple(s for s in sat_ids
                     if any(live[s, g] for g in gs_ids))
    return rl, grounded


def schedule_phased(scn: Scenario, vis: VisibilitySet, rplan: ReflectorPlan,
                    p_scheme: str) -> tuple[SuperframeSchedule, ...]:
    """Run the per-superframe scheduler across the whole horizon."""
    nodes = scn.nodes()
    sats = satellite_ids(nodes)
    users = p_user_ids(nodes)
    gss = ground_station_ids(nodes)
    grid = scn.grid
    slot_count = grid.slots_per_superframe

    cache: dict[tuple, PhasedArrayPlan] = {}
    records: list[SuperframeSchedule] = []
    for m in range(grid.period_count):
        for sf in range(grid.superframes_per_period):
            rl, grounded = effective_reflector_topology(
                rplan, m, sf, grid, sats, gss)
            part = partition_topology(rplan, m, nodes, seed=scn.seed,
                                      superframe=sf, rl_edges=rl,
                                      grounded=grounded)
            pairs = tuple(vis.superframe_pairs(m, sf))
            if p_scheme == "pcpd":
                key = (pairs, part.signature(), rl,
                       scn.phased_array.signature(), slot_count)
                plan = cache.get(key)
                if plan is None:
                    plan = pcpd.step_superframe(
                        pairs, sats, users, part, rl, scn.phased_array,
                        slot_count)
                    cache[key] = plan
            elif p_scheme == "dfcp":
                # deliberately blind to the reflector topology
                key = (pairs, scn.phased_array.signature(),
                       scn.baseline.fairness_gain, slot_count)
                plan = cache.get(key)
                if plan is None:
                    plan = baselines.dfcp_step(
                        pairs, sats, users, scn.phased_array, scn.baseline,
                        slot_count)
                    cache[key] = plan
            else:
                raise ValueError(f"unknown phased-array scheme {p_scheme!r}")
            records.append(SuperframeSchedule(m, sf, part, rl, plan))
    return tuple(records)


def evaluate(scn: Scenario, rplan: ReflectorPlan,
             records: Sequence[SuperframeSchedule]) -> MetricReport:
    nodes = scn.nodes()
    sats = satellite_ids(nodes)
    traffic = TrafficModel()
    r_bundles = metrics.r_delay(rplan, nodes, traffic)
    sat_bundles = metrics.p_delay_satellites(records, sats)
    user_bundles = metrics.p_delay_users(records, p_user_ids(nodes))
    return metrics.assemble_report(r_bundles, sat_bundles, user_bundles,
                                   records, sats)


def run_scenario(scn: Scenario,
                 vis: VisibilitySet | None = None) -> list[SchemeRun]:
    """Execute every scheme combination of the scenario."""
    if vis is None:
        vis = build_visibility(scn)
    rplans: dict[str, ReflectorPlan] = {}
    runs: list[SchemeRun] = []
    for r_scheme, p_scheme in scn.schemes:
        if r_scheme not in rplans:
            rplans[r_scheme] = plan_reflector(scn, vis, r_scheme)
        rplan = rplans[r_scheme]
        records = schedule_phased(scn, vis, rplan, p_scheme)
        report = evaluate(scn, rplan, records)
        runs.append(SchemeRun(r_scheme, p_scheme, rplan, records, report))
    return runs


# ---------------------------------------------------------------------------
# Tabular writers (deterministic formatting)
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_reflector_plan(path: Path, plan: ReflectorPlan,
                         nodes: Sequence[Node]) -> None:
    sats = set(satellite_ids(nodes))
    gss = set(ground_station_ids(nodes))
    lines = ["# period\ti\tj\tkind"]
    for m in range(plan.period_count):
        for i, j in plan.link_pairs(m):
            if i in sats and j in sats:
                kind = "sat-sat"
            elif j in gss or i in gss:
                kind = "sat-gs"
            else:
                kind = "sat-user"
            lines.append(f"{m}\t{i}\t{j}\t{kind}")
    path.write_text("\n".join(lines) + "\n")


def write_deficit_report(path: Path, plan: ReflectorPlan,
                         nodes: Sequence[Node]) -> None:
    sats = satellite_ids(nodes)
    gss = ground_station_ids(nodes)
    lines = ["# period\tgs_links\tdeficit"]
    for m in range(plan.period_count):
        gs_links = sum(int(plan.links[m, s, g]) for s in sats for g in gss)
        lines.append(f"{m}\t{gs_links}\t{int(plan.deficits[m])}")
    lines.append("# unmet_access\tuser\twindow_start")
    for user, start in plan.unmet_access:
        lines.append(f"unmet\t{user}\t{start}")
    path.write_text("\n".join(lines) + "\n")


def write_phased_plan(path: Path,
                      records: Sequence[SuperframeSchedule]) -> None:
    lines = ["# period\tsuperframe\tslot\ti\tj"]
    for rec in records:
        for t, i, j in rec.plan.all_pairs():
            lines.append(f"{rec.period}\t{rec.superframe}\t{t}\t{i}\t{j}")
    path.write_text("\n".join(lines) + "\n")


def write_metric_report(path: Path, scenario_name: str,
                        runs: Sequence[SchemeRun]) -> None:
    lines = ["# scenario\tr_scheme\tp_scheme\tmetric\tvalue\tdelivered"
             "\tcensored"]
    for run in runs:
        for metric, value, delivered, censored in run.report.rows():
            lines.append(f"{scenario_name}\t{run.r_scheme}\t{run.p_scheme}"
                         f"\t{metric}\t{_fmt(value)}\t{delivered}"
                         f"\t{censored}")
    path.write_text("\n".join(lines) + "\n")


def write_visibility(path_periods: Path, path_superframes: Path,
                     vis: VisibilitySet, grid: TimeGrid) -> None:
    lines = ["# period\ti\tj"]
    for m in range(grid.period_count):
        for i, j in vis.period_pairs(m):
            lines.append(f"{m}\t{i}\t{j}")
    path_periods.write_text("\n".join(lines) + "\n")
    lines = ["# period\tsuperframe\ti\tj"]
    for m in range(grid.period_count):
        for sf in range(grid.superframes_per_period):
            for i, j in vis.superframe_pairs(m, sf):
                lines.append(f"{m}\t{sf}\t{i}\t{j}")
    path_superframes.write_text("\n".join(lines) + "\n")


def write_run_outputs(out_dir: Path, scn: Scenario,
                      runs: Sequence[SchemeRun]) -> list[Path]:
    """Write plan exports and the metric table; returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    nodes = scn.nodes()
    written: list[Path] = []
    seen_r: set[str] = set()
    for run in runs:
        if run.r_scheme not in seen_r:
            seen_r.add(run.r_scheme)
            p1 = out_dir / f"rplan_{run.r_scheme}.tsv"
            write_reflector_plan(p1, run.rplan, nodes)
            p2 = out_dir / f"deficits_{run.r_scheme}.tsv"
            write_deficit_report(p2, run.rplan, nodes)
            written.extend([p1, p2])
        p3 = out_dir / f"pplan_{run.r_scheme}_{run.p_scheme}.tsv"
        write_phased_plan(p3, run.records)
        written.append(p3)
    p4 = out_dir / "metrics.tsv"
    write_metric_report(p4, scn.name, runs)
    written.append(p4)
    return written
