"""Shared domain types: nodes, the time hierarchy, visibility, link plans.

Everything here is immutable after construction and safe to share across
threads; the two operations (`partition_topology`, `validate_reflector_plan`)
are pure functions.

Node identifiers are dense integers assigned at scenario load, ordered
satellites < R-users < P-users < ground stations, so that array indexing and
tie-breaking are reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .rcpd import RcpdParams

#: Sentinel terminal count for ground stations (no cap on reflector links).
UNBOUNDED = -1


class NodeKind(Enum):
    SATELLITE = "satellite"
    R_USER = "r_user"
    P_USER = "p_user"
    GROUND_STATION = "ground_station"


@dataclass(frozen=True)
class Node:
    """A satellite, reflector user, phased-array user, or ground station.

    ``trajectory`` is a reference into the geometry layer: an orbit id for
    spacecraft, or ``(lat_deg, lon_deg)`` for a ground station.
    """

    id: int
    kind: NodeKind
    reflector_terminals: int
    has_phased_array: bool
    trajectory: str | tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.kind is NodeKind.R_USER:
            if self.reflector_terminals != 1 or self.has_phased_array:
                raise ValueError(f"node {self.id}: an R-user has exactly one "
                                 "reflector terminal and no phased array")
        elif self.kind is NodeKind.P_USER:
            if self.reflector_terminals != 0 or not self.has_phased_array:
                raise ValueError(f"node {self.id}: a P-user has a phased "
                                 "array and no reflector terminals")
        elif self.kind is NodeKind.GROUND_STATION:
            if self.has_phased_array:
                raise ValueError(f"node {self.id}: ground stations carry no "
                                 "phased array")
        elif self.kind is NodeKind.SATELLITE:
            if self.reflector_terminals < 0 or not self.has_phased_array:
                raise ValueError(f"node {self.id}: a satellite needs a "
                                 "terminal inventory and a phased array")

    @property
    def is_satellite(self) -> bool:
        return self.kind is NodeKind.SATELLITE


def satellite(node_id: int, reflector_terminals: int = 2,
              trajectory: str | None = None) -> Node:
    return Node(node_id, NodeKind.SATELLITE, reflector_terminals, True,
                trajectory)


def r_user(node_id: int, trajectory: str | None = None) -> Node:
    return Node(node_id, NodeKind.R_USER, 1, False, trajectory)


def p_user(node_id: int, trajectory: str | None = None) -> Node:
    return Node(node_id, NodeKind.P_USER, 0, True, trajectory)


def ground_station(node_id: int,
                   location: tuple[float, float] | None = None) -> Node:
    return Node(node_id, NodeKind.GROUND_STATION, UNBOUNDED, False, location)


def check_dense_ids(nodes: Sequence[Node]) -> None:
    """Planners index arrays by node id; ids must equal list positions."""
    for pos, node in enumerate(nodes):
        if node.id != pos:
            raise ValueError(f"node ids must be dense 0..{len(nodes) - 1}; "
                             f"found id {node.id} at position {pos}")


def satellite_ids(nodes: Sequence[Node]) -> list[int]:
    return [n.id for n in nodes if n.kind is NodeKind.SATELLITE]


def r_user_ids(nodes: Sequence[Node]) -> list[int]:
    return [n.id for n in nodes if n.kind is NodeKind.R_USER]


def p_user_ids(nodes: Sequence[Node]) -> list[int]:
    return [n.id for n in nodes if n.kind is NodeKind.P_USER]


def ground_station_ids(nodes: Sequence[Node]) -> list[int]:
    return [n.id for n in nodes if n.kind is NodeKind.GROUND_STATION]


def rl_eligible(a: Node, b: Node) -> bool:
    """Pairs that may ever carry a reflector link."""
    kinds = {a.kind, b.kind}
    if a.id == b.id:
        return False
    if kinds == {NodeKind.SATELLITE}:
        return True
    return (NodeKind.SATELLITE in kinds
            and (NodeKind.R_USER in kinds or NodeKind.GROUND_STATION in kinds))


def pl_eligible(a: Node, b: Node) -> bool:
    """Pairs that may ever carry a phased-array link."""
    if a.id == b.id:
        return False
    kinds = {a.kind, b.kind}
    if kinds == {NodeKind.SATELLITE}:
        return True
    return NodeKind.SATELLITE in kinds and NodeKind.P_USER in kinds


@dataclass(frozen=True)
class TimeGrid:
    """Reflector-period / superframe / slot hierarchy.

    The first ``switching_superframes`` superframes of every period form the
    interval reserved for re-pointing reflector terminals; only reflector
    links carried over unchanged from the previous period are usable there.
    """

    period_count: int
    period_minutes: float = 60.0
    superframes_per_period: int = 12
    switching_superframes: int = 2
    slot_seconds: float = 10.0

    def __post_init__(self) -> None:
        if self.period_count < 1:
            raise ValueError("period_count must be >= 1")
        if self.period_minutes <= 0 or self.slot_seconds <= 0:
            raise ValueError("durations must be positive")
        if self.superframes_per_period < 1:
            raise ValueError("superframes_per_period must be >= 1")
        if not 0 <= self.switching_superframes < self.superframes_per_period:
            raise ValueError("switching_superframes must be smaller than "
                             "superframes_per_period")
        if self.slots_per_superframe < 1:
            raise ValueError("a superframe must contain at least one slot")

    @property
    def superframe_seconds(self) -> float:
        return self.period_minutes * 60.0 / self.superframes_per_period

    @property
    def slots_per_superframe(self) -> int:
        return int(round(self.superframe_seconds / self.slot_seconds))

    @property
    def total_superframes(self) -> int:
        return self.period_count * self.superframes_per_period

    @property
    def total_slots(self) -> int:
        return self.total_superframes * self.slots_per_superframe

    def slot_midpoint_seconds(self, period: int, superframe: int,
                              slot: int) -> float:
        """Absolute scenario time of a slot midpoint, in seconds."""
        return (period * self.period_minutes * 60.0
                + superframe * self.superframe_seconds
                + (slot + 0.5) * self.slot_seconds)

    def flat_slot(self, period: int, superframe: int, slot: int) -> int:
        """Global slot index, counting from scenario start."""
        return ((period * self.superframes_per_period + superframe)
                * self.slots_per_superframe + slot)


class VisibilitySet:
    """Geometric visibility at the two planning granularities.

    ``period_vis[m, i, j]`` is true only when the pair keeps an uninterrupted
    line of sight for the whole period (the static-state semantics reflector
    planning relies on). ``slot_vis[m, s, i, j]`` is the analogous relation
    per superframe over the phased-array-capable pairs.
    """

    def __init__(self, period_vis: np.ndarray, slot_vis: np.ndarray):
        period_vis = np.asarray(period_vis, dtype=bool)
        slot_vis = np.asarray(slot_vis, dtype=bool)
        if period_vis.ndim != 3 or period_vis.shape[1] != period_vis.shape[2]:
            raise ValueError("period_vis must have shape (M, N, N)")
        if slot_vis.ndim != 4 or slot_vis.shape[2] != slot_vis.shape[3]:
            raise ValueError("slot_vis must have shape (M, S, N, N)")
        if slot_vis.shape[0] != period_vis.shape[0] \
                or slot_vis.shape[2] != period_vis.shape[1]:
            raise ValueError("period_vis and slot_vis disagree on dimensions")
        for arr, name in ((period_vis, "period_vis"), (slot_vis, "slot_vis")):
            if not np.array_equal(arr, arr.swapaxes(-1, -2)):
                raise ValueError(f"{name} must be symmetric")
            if arr.reshape(-1, arr.shape[-1], arr.shape[-1]) \
                    .diagonal(axis1=-2, axis2=-1).any():
                raise ValueError(f"{name} must be irreflexive")
        self.period_vis = period_vis
        self.slot_vis = slot_vis
        self.period_vis.setflags(write=False)
        self.slot_vis.setflags(write=False)

    @property
    def period_count(self) -> int:
        return self.period_vis.shape[0]

    @property
    def node_count(self) -> int:
        return self.period_vis.shape[1]

    def period_pairs(self, period: int) -> list[tuple[int, int]]:
        """Visible unordered pairs during ``period``, sorted."""
        i, j = np.nonzero(np.triu(self.period_vis[period], k=1))
        return list(zip(i.tolist(), j.tolist()))

    def superframe_pairs(self, period: int,
                         superframe: int) -> list[tuple[int, int]]:
        """Phased-array-visible unordered pairs in one superframe, sorted."""
        i, j = np.nonzero(np.triu(self.slot_vis[period, superframe], k=1))
        return list(zip(i.tolist(), j.tolist()))

    @classmethod
    def full(cls, nodes: Sequence[Node], grid: TimeGrid) -> "VisibilitySet":
        """Every eligible pair visible at all times (synthetic scenarios)."""
        n = len(nodes)
        period = np.zeros((grid.period_count, n, n), dtype=bool)
        slot = np.zeros((grid.period_count, grid.superframes_per_period,
                         n, n), dtype=bool)
        for a in nodes:
            for b in nodes:
                if a.id < b.id and rl_eligible(a, b):
                    period[:, a.id, b.id] = period[:, b.id, a.id] = True
                if a.id < b.id and pl_eligible(a, b):
                    slot[:, :, a.id, b.id] = slot[:, :, b.id, a.id] = True
        return cls(period, slot)

    @classmethod
    def empty(cls, nodes: Sequence[Node], grid: TimeGrid) -> "VisibilitySet":
        n = len(nodes)
        return cls(
            np.zeros((grid.period_count, n, n), dtype=bool),
            np.zeros((grid.period_count, grid.superframes_per_period, n, n),
                     dtype=bool))


@dataclass(frozen=True)
class ReflectorPlan:
    """Per-period reflector link assignment (the slow-switching topology).

    ``links[m, i, j]`` is a symmetric boolean tensor; ``deficits[m]`` counts
    ground-station links the planner wanted but could not establish, and
    ``unmet_access`` records access windows that no assignment could satisfy
    (reported, not silently dropped).
    """

    links: np.ndarray
    params: "RcpdParams"
    deficits: np.ndarray
    unmet_access: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        links = np.asarray(self.links, dtype=bool)
        deficits = np.asarray(self.deficits, dtype=np.int64)
        links.setflags(write=False)
        deficits.setflags(write=False)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "deficits", deficits)
        if links.ndim != 3 or links.shape[1] != links.shape[2]:
            raise ValueError("links must have shape (M, N, N)")
        if deficits.shape != (links.shape[0],):
            raise ValueError("deficits must have one entry per period")

    @property
    def period_count(self) -> int:
        return self.links.shape[0]

    def link_pairs(self, period: int) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.links[period], k=1))
        return list(zip(i.tolist(), j.tolist()))

    def sat_sat_pairs(self, period: int,
                      sat_ids: Sequence[int]) -> list[tuple[int, int]]:
        sats = set(sat_ids)
        return [(i, j) for i, j in self.link_pairs(period)
                if i in sats and j in sats]

    def grounded_sats(self, period: int, sat_ids: Sequence[int],
                      gs_ids: Sequence[int]) -> set[int]:
        """Satellites holding a direct ground-station link this period."""
        out = set()
        for s in sat_ids:
            if any(self.links[period, s, g] for g in gs_ids):
                out.add(s)
        return out

    def access_satellite(self, user: int, period: int) -> int | None:
        """The satellite serving ``user`` this period, if any."""
        row = np.nonzero(self.links[period, user])[0]
        return int(row[0]) if row.size else None


@dataclass(frozen=True)
class TopologyPartition:
    """Ground-connected satellites vs. the disconnected remainder.

    ``ugsat_sets`` are the connected components of non-grounded satellites
    under satellite-satellite reflector links only; each has one seeded-random
    representative that phased-array planning will steer toward the ground.
    """

    gsats: frozenset[int]
    ugsat_sets: tuple[frozenset[int], ...]
    representatives: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.representatives) != len(self.ugsat_sets):
            raise ValueError("one representative per component required")
        for rep, comp in zip(self.representatives, self.ugsat_sets):
            if rep not in comp:
                raise ValueError(f"representative {rep} outside its component")
        seen: set[int] = set(self.gsats)
        for comp in self.ugsat_sets:
            if seen & comp:
                raise ValueError("partition components must be disjoint")
            seen |= comp

    @property
    def all_satellites(self) -> frozenset[int]:
        out = set(self.gsats)
        for comp in self.ugsat_sets:
            out |= comp
        return frozenset(out)

    def component_of(self, sat: int) -> int | None:
        """Index of the non-grounded component holding ``sat``, if any."""
        for idx, comp in enumerate(self.ugsat_sets):
            if sat in comp:
                return idx
        return None

    def signature(self) -> tuple:
        """Hashable identity used for memoising downstream scheduling."""
        return (tuple(sorted(self.gsats)),
                tuple(tuple(sorted(c)) for c in self.ugsat_sets),
                self.representatives)


@dataclass(frozen=True)
class PhasedArrayPlan:
    """One superframe of phased-array matchings, slot by slot."""

    matchings: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self) -> None:
        for t, matching in enumerate(self.matchings):
            seen: set[int] = set()
            for i, j in matching:
                if i >= j:
                    raise ValueError(f"slot {t}: pairs must be ordered (i<j)")
                if i in seen or j in seen:
                    raise ValueError(f"slot {t}: node reused within matching")
                seen.update((i, j))

    @property
    def slot_count(self) -> int:
        return len(self.matchings)

    def all_pairs(self) -> list[tuple[int, int, int]]:
        """Flat (slot, i, j) triples."""
        return [(t, i, j) for t, m in enumerate(self.matchings)
                for i, j in m]


@dataclass(frozen=True)
class PlanViolation:
    """One broken plan constraint: which rule, where, and on which nodes."""

    constraint: str
    period: int | None
    nodes: tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        where = f"period {self.period}" if self.period is not None else "plan"
        return f"[{self.constraint}] {where} nodes {self.nodes}: {self.detail}"


def _mix_seed(seed: int, period: int, superframe: int) -> int:
    # Splits one scenario seed into independent per-superframe streams.
    return (seed * 1_000_003 + period * 8191 + superframe * 131) & 0x7FFFFFFF


def partition_edges(sat_ids: Sequence[int],
                    sat_sat_edges: Iterable[tuple[int, int]],
                    grounded: Iterable[int],
                    rng: random.Random) -> TopologyPartition:
    """Partition satellites by ground connectivity over an explicit edge set.

    ``grounded`` are satellites with a direct ground-station link; reachability
    runs over ``sat_sat_edges`` only. Components of the rest become the
    non-grounded sets, each with a representative drawn from ``rng``.
    """
    sats = sorted(sat_ids)
    adj: dict[int, set[int]] = {s: set() for s in sats}
    for i, j in sat_sat_edges:
        if i in adj and j in adj:
            adj[i].add(j)
            adj[j].add(i)

    gsats: set[int] = set()
    stack = sorted(set(grounded) & set(sats))
    while stack:
        s = stack.pop()
        if s in gsats:
            continue
        gsats.add(s)
        stack.extend(adj[s] - gsats)

    components: list[frozenset[int]] = []
    seen: set[int] = set(gsats)
    for s in sats:
        if s in seen:
            continue
        comp: set[int] = set()
        stack = [s]
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend((adj[v] - comp) - gsats)
        seen |= comp
        components.append(frozenset(comp))

    components.sort(key=min)
    reps = tuple(rng.choice(sorted(comp)) for comp in components)
    return TopologyPartition(frozenset(gsats), tuple(components), reps)


def partition_topology(plan: ReflectorPlan, period: int,
                       nodes: Sequence[Node], seed: int = 0,
                       superframe: int = 0,
                       rl_edges: Iterable[tuple[int, int]] | None = None,
                       grounded: Iterable[int] | None = None,
                       ) -> TopologyPartition:
    """Partition the satellites of ``plan`` at ``period``.

    Satellite-user reflector links never join components (users only access).
    ``rl_edges``/``grounded`` override the period's own link set; the
    orchestrator uses that during switching superframes, when only links
    carried over from the previous period are live.
    """
    if not 0 <= period < plan.period_count:
        raise ValueError(f"period {period} outside plan horizon")
    sats = satellite_ids(nodes)
    gss = ground_station_ids(nodes)
    if rl_edges is None:
        rl_edges = plan.sat_sat_pairs(period, sats)
    if grounded is None:
        grounded = plan.grounded_sats(period, sats, gss)
    rng = random.Random(_mix_seed(seed, period, superframe))
    return partition_edges(sats, rl_edges, grounded, rng)


def validate_reflector_plan(plan: ReflectorPlan, vis: VisibilitySet,
                            nodes: Sequence[Node]) -> list[PlanViolation]:
    """Independent checker for every reflector-plan constraint.

    Returns an empty list iff the plan is fully consistent: binary symmetric
    links on visible, kind-compatible pairs; per-node degree caps; the
    sliding access window for every R-user; and the ground-link floor net of
    the recorded deficits. Dimension mismatches raise instead of reporting.
    """
    check_dense_ids(nodes)
    if plan.links.shape != vis.period_vis.shape:
        raise ValueError(
            f"plan dimensions {plan.links.shape} do not match visibility "
            f"dimensions {vis.period_vis.shape}")
    if plan.links.shape[1] != len(nodes):
        raise ValueError("plan dimensions do not match the node set")

    out: list[PlanViolation] = []
    m_count = plan.period_count
    sats = satellite_ids(nodes)
    users = r_user_ids(nodes)
    gss = ground_station_ids(nodes)
    params = plan.params

    for m in range(m_count):
        x = plan.links[m]
        if not np.array_equal(x, x.T):
            i, j = next(zip(*np.nonzero(x != x.T)))
            out.append(PlanViolation("symmetry", m, (int(i), int(j)),
                                     "link tensor not symmetric"))
        for i, j in plan.link_pairs(m):
            if not vis.period_vis[m, i, j]:
                out.append(PlanViolation(
                    "visibility", m, (i, j),
                    "link scheduled on a pair without full-period "
                    "visibility"))
            if not rl_eligible(nodes[i], nodes[j]):
                out.append(PlanViolation(
                    "link-kind", m, (i, j),
                    f"{nodes[i].kind.value} to {nodes[j].kind.value} pairs "
                    "cannot carry reflector links"))
        for s in sats:
            degree = int(x[s].sum())
            cap = nodes[s].reflector_terminals
            if degree > cap:
                out.append(PlanViolation(
                    "sat-degree", m, (s,),
                    f"satellite uses {degree} reflector links "
                    f"but carries {cap} terminals"))
        for u in users:
            degree = int(x[u].sum())
            if degree > 1:
                out.append(PlanViolation(
                    "user-degree", m, (u,),
                    f"user holds {degree} links with a single terminal"))
        gs_links = sum(int(x[s, g]) for s in sats for g in gss)
        deficit = int(plan.deficits[m])
        if deficit < 0:
            out.append(PlanViolation("gs-floor", m, (),
                                     f"negative deficit {deficit}"))
        elif gs_links < params.gs_link_floor - deficit:
            out.append(PlanViolation(
                "gs-floor", m, (),
                f"{gs_links} ground links < floor {params.gs_link_floor} "
                f"minus recorded deficit {deficit}"))

    f = params.access_window
    waived = set(plan.unmet_access)
    for u in users:
        served = [bool(plan.links[m, u, :].any()) for m in range(m_count)]
        for start in range(m_count - f + 1):
            if not any(served[start:start + f]) and (u, start) not in waived:
                out.append(PlanViolation(
                    "access-window", start, (u,),
                    f"user has no access in periods "
                    f"[{start}, {start + f - 1}]"))
    return out
