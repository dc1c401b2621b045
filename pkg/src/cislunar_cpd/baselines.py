"""Comparison planners: a terminal-utilization reflector scheme and a
fairness-weighted phased-array scheme.

Both are behavior-level approximations of published schemes, reconstructed
from their externally visible behavior rather than their original internals:

- ``laa_pmm_plan`` greedily attaches ground links up to the configured floor,
  then repeatedly maximum-matches the remaining terminal capacity, preferring
  user links, until no capacity pairs remain. It serves visible users every
  period and keeps terminal utilization maximal; it has no access-frequency
  or ground-floor optimization beyond the greedy attachment.
- ``dfcp_step`` ages every edge uniformly (weight = gain x slots since the
  pair last matched), stops serving a user once its per-superframe quota is
  met, and runs a maximum-weight matching per slot. It never looks at the
  reflector topology, so its plans are a function of visibility alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx

from .core import (Node, PhasedArrayPlan, ReflectorPlan, VisibilitySet,
                   ground_station_ids, r_user_ids, satellite_ids)
from .pcpd import WeightParams, _slot_matching
from .rcpd import RcpdParams

import numpy as np


@dataclass(frozen=True)
class BaselineConfig:
    """Shared baseline knobs; ``fairness_gain`` scales the per-slot aging
    weight of the fairness matcher."""

    fairness_gain: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.fairness_gain <= 0:
            raise ValueError("fairness_gain must be positive")


def _greedy_gs_attach(vis_period: np.ndarray, sats: Sequence[int],
                      gss: Sequence[int], cap: dict[int, int],
                      floor: int) -> list[tuple[int, int]]:
    """Attach satellites to ground stations, spreading across satellites."""
    links: list[tuple[int, int]] = []
    gs_count = {s: 0 for s in sats}
    while len(links) < floor:
        candidates = [(gs_count[s], s, g) for s in sats for g in gss
                      if vis_period[s, g] and cap[s] > 0
                      and (s, g) not in links]
        if not candidates:
            break
        _, s, g = min(candidates)
        links.append((s, g))
        cap[s] -= 1
        gs_count[s] += 1
    return links


def laa_pmm_plan(vis: VisibilitySet, nodes: Sequence[Node],
                 params: RcpdParams) -> ReflectorPlan:
    """Per-period terminal-utilization planner.

    Each period is planned independently: ground links first (greedy up to
    the floor), then repeated maximum-cardinality matchings over remaining
    capacity with user links preferred, until capacity or pairs run out.
    Access windows are not optimized; any that end up unserved are recorded
    in the plan for reporting.
    """
    sats = satellite_ids(nodes)
    users = r_user_ids(nodes)
    gss = ground_station_ids(nodes)
    m_count = vis.period_count
    n = vis.node_count
    links = np.zeros((m_count, n, n), dtype=bool)

    for m in range(m_count):
        cap = {s: nodes[s].reflector_terminals for s in sats}
        cap.update({u: 1 for u in users})
        chosen: set[tuple[int, int]] = set()
        for s, g in _greedy_gs_attach(vis.period_vis[m], sats, gss, cap,
                                      params.gs_link_floor):
            chosen.add((min(s, g), max(s, g)))
        candidates = ([(min(a, b), max(a, b), 1)
                       for k, a in enumerate(sats) for b in sats[k + 1:]]
                      + [(min(s, u), max(s, u), 2)
                         for s in sats for u in users])
        while True:
            graph = nx.Graph()
            for a, b, weight in sorted(candidates):
                if (a, b) in chosen or not vis.period_vis[m, a, b]:
                    continue
                if cap[a] < 1 or cap[b] < 1:
                    continue
                graph.add_edge(a, b, weight=weight)
            if graph.number_of_edges() == 0:
                break
            matched = nx.max_weight_matching(graph, maxcardinality=True)
            if not matched:
                break
            for i, j in sorted((min(i, j), max(i, j)) for i, j in matched):
                chosen.add((i, j))
                cap[i] -= 1
                cap[j] -= 1
        for i, j in chosen:
            links[m, i, j] = links[m, j, i] = True

    deficits = np.array(
        [max(0, params.gs_link_floor
             - sum(int(links[m, s, g]) for s in sats for g in gss))
         for m in range(m_count)], dtype=np.int64)
    unmet = []
    f = params.access_window
    for u in users:
        served = [bool(links[m, u, :].any()) for m in range(m_count)]
        for start in range(m_count - f + 1):
            if not any(served[start:start + f]):
                unmet.append((u, start))
    return ReflectorPlan(links, params, deficits, tuple(sorted(unmet)))


def dfcp_step(pairs: Sequence[tuple[int, int]], sat_ids: Sequence[int],
              user_ids: Sequence[int], wp: WeightParams,
              config: BaselineConfig, slot_count: int) -> PhasedArrayPlan:
    """Fairness-aged matching over one superframe.

    Edge weight is ``fairness_gain`` times the slots since the pair last
    matched (starting at one), identically for satellite and user edges; a
    user's edges drop to zero once its quota is met. The reflector topology
    is never consulted, so output depends on the visibility graph alone.
    """
    sats = set(sat_ids)
    users = set(user_ids)
    sat_pairs = sorted((min(i, j), max(i, j)) for i, j in pairs
                       if i in sats and j in sats)
    usr_pairs = sorted((i, j) if i in users else (j, i)
                       for i, j in pairs
                       if (i in users) != (j in users)
                       and (i in sats or j in sats))
    age: dict[tuple[int, int], int] = {}
    for i, j in sat_pairs:
        age[(i, j)] = 1
    for u, s in usr_pairs:
        age[(min(u, s), max(u, s))] = 1
    user_total = {u: 0 for u in sorted(users)}

    matchings: list[tuple[tuple[int, int], ...]] = []
    for _ in range(slot_count):
        sat_edges = [(i, j, config.fairness_gain * age[(i, j)])
                     for i, j in sat_pairs]
        user_edges = []
        for u, s in usr_pairs:
            quota_left = wp.quota(u) - user_total[u]
            weight = (config.fairness_gain * age[(min(u, s), max(u, s))]
                      if quota_left > 0 else 0)
            user_edges.append((u, s, weight))
        matched = _slot_matching(sat_edges, user_edges)
        matchings.append(tuple(matched))
        matched_keys = {(min(i, j), max(i, j)) for i, j in matched}
        for key in age:
            age[key] = 1 if key in matched_keys else age[key] + 1
        for i, j in matched:
            for v in (i, j):
                if v in user_total:
                    user_total[v] += 1
    return PhasedArrayPlan(tuple(matchings))
