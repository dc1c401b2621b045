"""Per-superframe phased-array link scheduling.

Each superframe is planned slot by slot: edges of the superframe's visibility
graph get integer weights reflecting user service quotas, the pull of
non-grounded satellite sets toward ground-connected ones, and one-shot
inter-satellite ranging value; a maximum-weight matching then picks the slot's
links. Tendency counters grow while a user or a non-grounded set goes
unserved, so neglected parties win later slots.

Weights are integers throughout (all constants and recursions are integral),
which keeps the matching free of floating-point tie ambiguity. Zero-weight
edges are never committed: they add nothing to the objective and would burn
terminal energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import PhasedArrayPlan, TopologyPartition


@dataclass(frozen=True)
class WeightParams:
    """Weight constants and per-user link quotas.

    ``distinct_partner_diversity`` switches the diversity test from the
    cumulative served-link count to the number of distinct satellite partners
    (a sensitivity knob; the default compares the cumulative count).
    """

    service_constant: int = 1
    comm_constant: int = 8
    ranging_constant: int = 30
    default_quota: int = 4
    quotas: Mapping[int, int] = field(default_factory=dict)
    distinct_partner_diversity: bool = False

    def __post_init__(self) -> None:
        if min(self.service_constant, self.comm_constant,
               self.ranging_constant) <= 0:
            raise ValueError("weight constants must be positive")
        if self.default_quota < 0 or any(q < 0 for q in self.quotas.values()):
            raise ValueError("link quotas must be nonnegative")

    def quota(self, user: int) -> int:
        return self.quotas.get(user, self.default_quota)

    def signature(self) -> tuple:
        return (self.service_constant, self.comm_constant,
                self.ranging_constant, self.default_quota,
                tuple(sorted(self.quotas.items())),
                self.distinct_partner_diversity)


class TendencyState:
    """Counters driving the weight assignment inside one superframe.

    Tracks, per user, the access tendency, the served-link total and the
    distinct partners; per non-grounded component, the grounding tendency;
    and per node pair the cumulative link count. All counters reset at the
    superframe boundary, where this object is created.
    """

    def __init__(self, users: Iterable[int], part: TopologyPartition,
                 gbar: Mapping[int, int]):
        self.access_tendency = {u: 1 for u in sorted(users)}
        self.ground_tendency = {n: 1 for n in range(len(part.ugsat_sets))}
        self.pair_links: dict[tuple[int, int], int] = {}
        self.user_total = {u: 0 for u in self.access_tendency}
        self.user_partners: dict[int, set[int]] = \
            {u: set() for u in self.access_tendency}
        self.gbar = dict(gbar)

    def pair_count(self, i: int, j: int) -> int:
        return self.pair_links.get((min(i, j), max(i, j)), 0)

    def advance(self, matching: Sequence[tuple[int, int]],
                part: TopologyPartition) -> None:
        """Fold one committed slot into the counters for the next slot."""
        matched_users: set[int] = set()
        grounded_components: set[int] = set()
        for i, j in matching:
            key = (min(i, j), max(i, j))
            self.pair_links[key] = self.pair_links.get(key, 0) + 1
            for a, b in ((i, j), (j, i)):
                if a in self.user_total:
                    matched_users.add(a)
                    self.user_total[a] += 1
                    self.user_partners[a].add(b)
            comp_i = part.component_of(i)
            comp_j = part.component_of(j)
            if comp_i is not None and j in part.gsats:
                grounded_components.add(comp_i)
            if comp_j is not None and i in part.gsats:
                grounded_components.add(comp_j)
        for u in self.access_tendency:
            self.access_tendency[u] = \
                1 if u in matched_users else self.access_tendency[u] + 1
        for n in self.ground_tendency:
            self.ground_tendency[n] = \
                1 if n in grounded_components else self.ground_tendency[n] + 1


def user_weight(user: int, sat: int, state: TendencyState,
                wp: WeightParams) -> int:
    """Weight of a user-to-satellite edge for the coming slot."""
    quota = wp.quota(user)
    total = state.user_total[user]
    if total >= quota:
        return 0
    base = state.access_tendency[user] * (quota - total) * wp.service_constant
    diversity = (len(state.user_partners[user])
                 if wp.distinct_partner_diversity else total)
    if diversity >= state.gbar.get(user, 0):
        return base
    if state.pair_count(user, sat) == 0:
        return base
    return 1


def comm_weight(i: int, j: int, part: TopologyPartition,
                state: TendencyState, wp: WeightParams) -> int:
    """Ground-relay value of a satellite pair.

    Positive only on (representative of a non-grounded set, grounded
    satellite) edges, in either orientation; everything else relays nothing
    new.
    """
    for a, b in ((i, j), (j, i)):
        comp = part.component_of(a)
        if comp is not None and b in part.gsats:
            if part.representatives[comp] == a:
                return state.ground_tendency[comp] * wp.comm_constant
            return 0
    return 0


def ranging_weight(i: int, j: int, state: TendencyState, wp: WeightParams,
                   rl_pairs: frozenset[tuple[int, int]]) -> int:
    """One-shot ranging value: only fresh pairs without an active reflector
    link measure anything new."""
    key = (min(i, j), max(i, j))
    if key in rl_pairs or state.pair_count(i, j) > 0:
        return 0
    return wp.ranging_constant


def sat_weight(i: int, j: int, part: TopologyPartition, state: TendencyState,
               wp: WeightParams,
               rl_pairs: frozenset[tuple[int, int]]) -> int:
    return (comm_weight(i, j, part, state, wp)
            + ranging_weight(i, j, state, wp, rl_pairs))


# ---------------------------------------------------------------------------
# Maximum-weight matching
# ---------------------------------------------------------------------------

def max_weight_matching(
        edges: Iterable[tuple[int, int, int | float]]
) -> list[tuple[int, int]]:
    """Exact maximum-weight matching on a general graph.

    Edges are ``(i, j, weight)`` with finite nonnegative weights; zero-weight
    edges never appear in the result. Returns sorted vertex pairs. Uses the
    blossom algorithm, with insertion in sorted edge order so equal-weight
    ties resolve deterministically.
    """
    graph = nx.Graph()
    for i, j, w in sorted((min(i, j), max(i, j), w) for i, j, w in edges):
        if i == j:
            raise ValueError(f"self-loop at vertex {i}")
        if not np.isfinite(w) or w < 0:
            raise ValueError(f"edge ({i}, {j}) has invalid weight {w!r}")
        if w > 0:
            graph.add_edge(i, j, weight=w)
    mate = nx.max_weight_matching(graph, maxcardinality=False)
    return sorted((min(i, j), max(i, j)) for i, j in mate)


def _enumerate_matchings(edges: Sequence[tuple[int, int]],
                         limit: int) -> list[list[int]] | None:
    """All matchings (as edge-index lists) of a small graph, or None when the
    count passes ``limit``."""
    out: list[list[int]] = []

    def recurse(idx: int, used: set[int], chosen: list[int]) -> bool:
        if len(out) > limit:
            return False
        out.append(list(chosen))
        for k in range(idx, len(edges)):
            i, j = edges[k]
            if i in used or j in used:
                continue
            used.update((i, j))
            chosen.append(k)
            if not recurse(k + 1, used, chosen):
                return False
            chosen.pop()
            used.difference_update((i, j))
        return True

    if not recurse(0, set(), []):
        return None
    return out


def _match_core_fringe(core_edges: Sequence[tuple[int, int, int]],
                       fringe_edges: Sequence[tuple[int, int, int]],
                       ) -> list[tuple[int, int]] | None:
    """Fast exact matching when the graph splits into a small satellite core
    plus a bipartite user fringe.

    ``core_edges`` connect core vertices to each other; ``fringe_edges``
    connect a fringe vertex (first element) to a core vertex. Enumerates the
    core's matchings and solves the fringe optimally for each with an
    assignment solve. Returns None when the core is too big, signalling the
    caller to fall back to the general matcher.
    """
    core_pairs = [(i, j) for i, j, _ in core_edges]
    matchings = _enumerate_matchings(core_pairs, limit=2000)
    if matchings is None:
        return None

    core_nodes = sorted({v for i, j in core_pairs for v in (i, j)}
                        | {s for _, s, _ in fringe_edges})
    core_index = {v: k for k, v in enumerate(core_nodes)}
    fringe_nodes = sorted({u for u, _, _ in fringe_edges})
    fringe_index = {u: k for k, u in enumerate(fringe_nodes)}
    weight = np.zeros((len(core_nodes), len(fringe_nodes)))
    for u, s, w in fringe_edges:
        weight[core_index[s], fringe_index[u]] = \
            max(weight[core_index[s], fringe_index[u]], w)

    best_total = -1
    best_pairs: list[tuple[int, int]] = []
    for chosen in matchings:
        total = sum(core_edges[k][2] for k in chosen)
        used = {v for k in chosen for v in core_pairs[k]}
        pairs = [(min(core_edges[k][0], core_edges[k][1]),
                  max(core_edges[k][0], core_edges[k][1])) for k in chosen]
        free = [v for v in core_nodes if v not in used]
        if free and fringe_nodes:
            sub = weight[[core_index[v] for v in free], :]
            rows, cols = linear_sum_assignment(sub, maximize=True)
            for r, c in zip(rows.tolist(), cols.tolist()):
                w = sub[r, c]
                if w > 0:
                    total += int(w)
                    a, b = free[r], fringe_nodes[c]
                    pairs.append((min(a, b), max(a, b)))
        if total > best_total:
            best_total = total
            best_pairs = sorted(pairs)
    return best_pairs


def _slot_matching(sat_edges: Sequence[tuple[int, int, int]],
                   user_edges: Sequence[tuple[int, int, int]],
                   ) -> list[tuple[int, int]]:
    """Matching for one slot: satellite core plus user fringe."""
    sat_edges = [e for e in sat_edges if e[2] > 0]
    user_edges = [e for e in user_edges if e[2] > 0]
    result = _match_core_fringe(sat_edges, user_edges)
    if result is not None:
        return result
    return max_weight_matching(
        [(i, j, w) for i, j, w in sat_edges]
        + [(u, s, w) for u, s, w in user_edges])


# ---------------------------------------------------------------------------
# Superframe scheduling
# ---------------------------------------------------------------------------

def visible_satellite_counts(pairs: Iterable[tuple[int, int]],
                             sat_ids: Iterable[int]) -> dict[int, int]:
    """Distinct satellites adjacent to each node in a superframe graph."""
    sats = set(sat_ids)
    partners: dict[int, set[int]] = {}
    for i, j in pairs:
        if j in sats:
            partners.setdefault(i, set()).add(j)
        if i in sats:
            partners.setdefault(j, set()).add(i)
    return {node: len(p) for node, p in sorted(partners.items())}


def step_superframe(pairs: Sequence[tuple[int, int]], sat_ids: Sequence[int],
                    user_ids: Sequence[int], part: TopologyPartition,
                    rl_pairs: Iterable[tuple[int, int]], wp: WeightParams,
                    slot_count: int) -> PhasedArrayPlan:
    """Plan all slots of one superframe over its visibility graph.

    ``pairs`` are the slot-visible unordered pairs, ``rl_pairs`` the active
    satellite-satellite reflector links this superframe (exempt from ranging
    weight). The partition (including representatives) is fixed for the whole
    superframe; tendency counters evolve slot to slot and do not leak across
    superframes.
    """
    sats = set(sat_ids)
    users = set(user_ids)
    sat_pairs = sorted((min(i, j), max(i, j)) for i, j in pairs
                       if i in sats and j in sats)
    usr_pairs = sorted((i, j) if i in users else (j, i)
                       for i, j in pairs
                       if (i in users) != (j in users)
                       and (i in sats or j in sats))
    rl_frozen = frozenset((min(i, j), max(i, j)) for i, j in rl_pairs)
    gbar = visible_satellite_counts(pairs, sat_ids)
    state = TendencyState(users, part, gbar)

    matchings: list[tuple[tuple[int, int], ...]] = []
    for _ in range(slot_count):
        sat_edges = [(i, j, sat_weight(i, j, part, state, wp, rl_frozen))
                     for i, j in sat_pairs]
        user_edges = [(u, s, user_weight(u, s, state, wp))
                      for u, s in usr_pairs]
        matched = _slot_matching(sat_edges, user_edges)
        matchings.append(tuple(matched))
        state.advance(matched, part)
    return PhasedArrayPlan(tuple(matchings))
