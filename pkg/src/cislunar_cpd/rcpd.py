"""Reflector link planning: an integer program solved by branch and bound.

Per period, binary link variables exist for every visible pair that could
carry a reflector link (satellite-satellite, satellite-ground,
satellite-user). Degree caps encode terminal inventories; every R-user must
be served at least once in each sliding window of ``access_window``
consecutive periods; and each period should carry ``gs_link_floor`` ground
links, any shortfall being absorbed by a per-period deficit. The objective
maximizes inter-satellite links minus a large penalty per deficit unit and
per unserved access window, so connectivity is only ever bought after service
obligations are met.

The solver is a depth-first branch and bound with purely combinatorial
bounds (no LP relaxation): remaining satellite degree capacity caps the
inter-satellite links still reachable, after reserving capacity for ground
links and last-chance user service; a twin bound covers assignments that
instead pay a penalty. Variable order is fixed (period-major, then
satellite-satellite, satellite-ground, satellite-user pairs in index order),
value 1 is tried first, and a deterministic node budget replaces wall-clock
cutoffs by default, so identical inputs give identical plans.

Long horizons are solved as consecutive windows overlapping by
``access_window - 1`` periods with the overlap fixed to the previous
window's decisions, which preserves every sliding-window constraint across
the seams.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .core import (Node, ReflectorPlan, VisibilitySet, check_dense_ids,
                   ground_station_ids, r_user_ids, satellite_ids)

_KIND_ORDER = ("sat-sat", "sat-gs", "sat-user")
_NEG_INF = float("-inf")


class InfeasibleAccessError(ValueError):
    """Access-window constraints cannot all be met.

    ``windows`` lists the offending (user, window_start) pairs.
    """

    def __init__(self, windows: Sequence[tuple[int, int]]):
        self.windows = tuple(windows)
        detail = ", ".join(f"user {u} in periods [{s}..]"
                           for u, s in self.windows)
        super().__init__(f"unsatisfiable access windows: {detail}")


@dataclass(frozen=True)
class RcpdParams:
    """Knobs of the reflector planner.

    ``penalty`` must exceed the largest conceivable inter-satellite link
    total of one solve window so a single deficit or unserved window always
    outweighs connectivity. ``node_budget`` is the deterministic search cap;
    ``time_limit`` (seconds) is an optional extra safety that trades
    reproducibility for latency and is therefore off by default. With
    ``soft_access`` unserved access windows cost ``penalty`` each instead of
    making the problem infeasible.
    """

    reflectors_per_sat: int = 2
    access_window: int = 2
    gs_link_floor: int = 2
    penalty: int = 1000
    horizon: int = 6
    node_budget: int = 200_000
    time_limit: float | None = None
    soft_access: bool = True

    def __post_init__(self) -> None:
        if self.reflectors_per_sat < 1:
            raise ValueError("satellites need at least one terminal")
        if self.access_window < 1:
            raise ValueError("access window must span at least one period")
        if self.gs_link_floor < 0:
            raise ValueError("ground link floor must be nonnegative")
        if self.penalty <= 0 or self.horizon < 1 or self.node_budget < 1:
            raise ValueError("penalty, horizon and node budget must be "
                             "positive")


@dataclass(frozen=True)
class LinkVar:
    period: int
    i: int
    j: int
    kind: str


@dataclass(frozen=True)
class AccessWindow:
    user: int
    start: int
    periods: tuple[int, ...]


@dataclass(frozen=True)
class IlpModel:
    """Declarative content of one solve window.

    ``variables`` hold one binary per unordered visible pair per period
    (symmetry is structural; invisible pairs never get a variable).
    ``fixed_periods`` map leading overlap periods to their already-decided
    link sets. ``windows`` are the access constraints fully inside the
    range; ``dropped_windows`` are those no assignment could serve (reported,
    and under soft access each simply costs the penalty).
    """

    periods: tuple[int, ...]
    variables: tuple[LinkVar, ...]
    fixed_periods: Mapping[int, frozenset[tuple[int, int]]]
    windows: tuple[AccessWindow, ...]
    dropped_windows: tuple[AccessWindow, ...]
    params: RcpdParams
    sat_ids: tuple[int, ...]
    user_ids: tuple[int, ...]
    gs_ids: tuple[int, ...]

    @property
    def slack_count(self) -> int:
        return len(self.periods)

    def variable_positions(self, period: int) -> list[int]:
        return [k for k, v in enumerate(self.variables) if v.period == period]


@dataclass(frozen=True)
class SolveResult:
    """Assignment aligned with ``model.variables`` plus solve diagnostics."""

    assignment: tuple[int, ...]
    objective: int
    optimal: bool
    explored: int
    unserved_windows: tuple[tuple[int, int], ...]


def _pair_kind(i: int, j: int, sats: set[int], users: set[int],
               gss: set[int]) -> str | None:
    if i in sats and j in sats:
        return "sat-sat"
    if (i in sats and j in gss) or (j in sats and i in gss):
        return "sat-gs"
    if (i in sats and j in users) or (j in sats and i in users):
        return "sat-user"
    return None


def build_model(vis: VisibilitySet, nodes: Sequence[Node],
                params: RcpdParams, window: Sequence[int],
                fixed_periods: Mapping[int, frozenset[tuple[int, int]]]
                | None = None) -> IlpModel:
    """Assemble the link variables and constraints for one period window.

    ``window`` is a consecutive run of absolute period indices. Fixed periods
    must form a prefix of the window (the rolling-horizon overlap). Raises
    ``InfeasibleAccessError`` under hard access semantics when some window
    has no visible serving satellite at all.
    """
    check_dense_ids(nodes)
    window = tuple(window)
    if list(window) != list(range(window[0], window[-1] + 1)):
        raise ValueError("window must be a consecutive period range")
    if window[-1] >= vis.period_count:
        raise ValueError("window extends past the visibility horizon")
    fixed_periods = dict(fixed_periods or {})
    for idx, m in enumerate(window):
        if m in fixed_periods and idx != len([p for p in window[:idx]
                                              if p in fixed_periods]):
            raise ValueError("fixed periods must form a prefix of the window")

    sats = satellite_ids(nodes)
    users = r_user_ids(nodes)
    gss = ground_station_ids(nodes)
    sat_set, user_set, gs_set = set(sats), set(users), set(gss)

    n_sat_pairs = len(sats) * (len(sats) - 1) // 2
    if params.penalty <= n_sat_pairs * len(window):
        raise ValueError(
            f"penalty {params.penalty} does not dominate the "
            f"{n_sat_pairs * len(window)} possible inter-satellite links "
            "of this window")

    variables: list[LinkVar] = []
    for m in window:
        by_kind: dict[str, list[tuple[int, int]]] = \
            {k: [] for k in _KIND_ORDER}
        i_idx, j_idx = np.nonzero(np.triu(vis.period_vis[m], k=1))
        for i, j in zip(i_idx.tolist(), j_idx.tolist()):
            kind = _pair_kind(i, j, sat_set, user_set, gs_set)
            if kind is not None:
                by_kind[kind].append((i, j))
        for kind in _KIND_ORDER:
            for i, j in sorted(by_kind[kind]):
                variables.append(LinkVar(m, i, j, kind))

    f = params.access_window
    total_m = vis.period_count
    win_set = set(window)
    windows: list[AccessWindow] = []
    dropped: list[AccessWindow] = []
    for u in users:
        for start in range(0, total_m - f + 1):
            span = tuple(range(start, start + f))
            if not all(m in win_set for m in span):
                continue
            served_fixed = any(
                m in fixed_periods and any(u in pair
                                           for pair in fixed_periods[m])
                for m in span)
            has_free_var = any(
                v.kind == "sat-user" and v.period in span
                and v.period not in fixed_periods and u in (v.i, v.j)
                for v in variables)
            w = AccessWindow(u, start, span)
            if served_fixed or has_free_var:
                windows.append(w)
            else:
                dropped.append(w)

    if dropped and not params.soft_access:
        raise InfeasibleAccessError([(w.user, w.start) for w in dropped])

    return IlpModel(window, tuple(variables),
                    {m: frozenset(v) for m, v in fixed_periods.items()},
                    tuple(windows), tuple(dropped), params,
                    tuple(sats), tuple(users), tuple(gss))


class _Search:
    """Depth-first search state for one model solve."""

    def __init__(self, model: IlpModel, params: RcpdParams):
        self.model = model
        self.params = params
        self.W = len(model.periods)
        self.local = {m: k for k, m in enumerate(model.periods)}
        self.sats = list(model.sat_ids)
        self.sat_idx = {s: k for k, s in enumerate(self.sats)}
        self.users = list(model.user_ids)
        self.user_idx = {u: k for k, u in enumerate(self.users)}
        self.gs_set = set(model.gs_ids)
        self.P = params.penalty
        self.floor = params.gs_link_floor

        # Per-variable digest: (local period, ordinal inside period, i, j,
        # kind code, fixed value or -1).
        self.vinfo: list[tuple[int, int, int, int, int, int]] = []
        per_period_count = [0] * self.W
        kind_code = {"sat-sat": 0, "sat-gs": 1, "sat-user": 2}
        for var in model.variables:
            lm = self.local[var.period]
            ordinal = per_period_count[lm]
            per_period_count[lm] += 1
            if var.period in model.fixed_periods:
                pair = (min(var.i, var.j), max(var.i, var.j))
                fixed = 1 if pair in model.fixed_periods[var.period] else 0
            else:
                fixed = -1
            self.vinfo.append((lm, ordinal, var.i, var.j,
                               kind_code[var.kind], fixed))
        self.period_sizes = per_period_count

        # Suffix tables: free variables remaining at or after ordinal k of a
        # period, by category and endpoint (used by the bound).
        S, U = len(self.sats), len(self.users)
        self.sfx_satdeg = [[[0] * S for _ in range(n + 1)]
                           for n in self.period_sizes]
        self.sfx_gs = [[[0] * S for _ in range(n + 1)]
                       for n in self.period_sizes]
        self.sfx_user = [[[0] * U for _ in range(n + 1)]
                         for n in self.period_sizes]
        self.sfx_satcnt = [[0] * (n + 1) for n in self.period_sizes]
        for pos in range(len(self.vinfo) - 1, -1, -1):
            lm, k, i, j, kind, fixed = self.vinfo[pos]
            self.sfx_satdeg[lm][k] = list(self.sfx_satdeg[lm][k + 1])
            self.sfx_gs[lm][k] = list(self.sfx_gs[lm][k + 1])
            self.sfx_user[lm][k] = list(self.sfx_user[lm][k + 1])
            self.sfx_satcnt[lm][k] = self.sfx_satcnt[lm][k + 1]
            if fixed >= 0:
                continue
            if kind == 0:
                self.sfx_satcnt[lm][k] += 1
                self.sfx_satdeg[lm][k][self.sat_idx[i]] += 1
                self.sfx_satdeg[lm][k][self.sat_idx[j]] += 1
            elif kind == 1:
                s = i if i in self.sat_idx else j
                self.sfx_gs[lm][k][self.sat_idx[s]] += 1
            else:
                u = i if i in self.user_idx else j
                self.sfx_user[lm][k][self.user_idx[u]] += 1

        # Windows in local coordinates.
        self.windows = [(self.user_idx[w.user],
                         tuple(self.local[m] for m in w.periods), w)
                        for w in model.windows]
        self.windows_by_last: list[list[int]] = [[] for _ in range(self.W)]
        self.windows_by_user: list[list[int]] = [[] for _ in range(U)]
        for wi, (ui, span, _) in enumerate(self.windows):
            self.windows_by_last[span[-1]].append(wi)
            self.windows_by_user[ui].append(wi)

        # Static per-period ingredients for future/global bounds.
        self.static_avail = [0] * self.W
        self.static_excess = [0] * self.W
        self.static_gs_reserve = [0] * self.W
        self.static_unavoid = [0] * self.W
        self.static_satcnt = [0] * self.W
        r = params.reflectors_per_sat
        for lm in range(self.W):
            avail = excess = 0
            for sk in range(S):
                a = min(r, self.sfx_satdeg[lm][0][sk])
                avail += a
                excess += r - a
            gs_possible = sum(min(r, self.sfx_gs[lm][0][sk])
                              for sk in range(S))
            self.static_avail[lm] = avail
            self.static_excess[lm] = excess
            self.static_gs_reserve[lm] = min(self.floor, gs_possible)
            self.static_unavoid[lm] = max(0, self.floor - gs_possible)
            self.static_satcnt[lm] = self.sfx_satcnt[lm][0]
        self.static_user_possible = [
            [self.sfx_user[lm][0][uk] > 0 for lm in range(self.W)]
            for uk in range(U)]
        # satellites that could serve (user, period), for capacity checks
        self.user_sats: list[list[list[int]]] = \
            [[[] for _ in range(self.W)] for _ in range(U)]
        for lm, k, i, j, kind, fixed in self.vinfo:
            if kind == 2 and fixed < 0:
                s, u = (i, j) if i in self.sat_idx else (j, i)
                self.user_sats[self.user_idx[u]][lm].append(self.sat_idx[s])

        # Per-period future bound and its suffix sums (penalty in units).
        self.fb = [0.0] * (self.W + 1)
        for lm in range(self.W - 1, -1, -1):
            a_ub = min((self.static_avail[lm]
                        - max(0, self.static_gs_reserve[lm]
                              - self.static_excess[lm])) // 2,
                       self.static_satcnt[lm])
            a_obj = max(a_ub, 0) - self.P * self.static_unavoid[lm]
            b_obj = (min(self.static_avail[lm] // 2, self.static_satcnt[lm])
                     - self.P * (self.static_unavoid[lm] + 1))
            self.fb[lm] = max(a_obj, b_obj)
        self.sfb = [0.0] * (self.W + 1)
        for lm in range(self.W - 1, -1, -1):
            self.sfb[lm] = self.fb[lm] + self.sfb[lm + 1]
        self.static_avail_sfx = [0] * (self.W + 1)
        self.static_excess_sfx = [0] * (self.W + 1)
        self.static_gsres_sfx = [0] * (self.W + 1)
        self.static_unavoid_sfx = [0] * (self.W + 1)
        self.static_satcnt_sfx = [0] * (self.W + 1)
        for lm in range(self.W - 1, -1, -1):
            self.static_avail_sfx[lm] = \
                self.static_avail[lm] + self.static_avail_sfx[lm + 1]
            self.static_excess_sfx[lm] = \
                self.static_excess[lm] + self.static_excess_sfx[lm + 1]
            self.static_gsres_sfx[lm] = \
                self.static_gs_reserve[lm] + self.static_gsres_sfx[lm + 1]
            self.static_unavoid_sfx[lm] = \
                self.static_unavoid[lm] + self.static_unavoid_sfx[lm + 1]
            self.static_satcnt_sfx[lm] = \
                self.static_satcnt[lm] + self.static_satcnt_sfx[lm + 1]

        # Event tape: variables interleaved with period-end markers.
        self.events: list[tuple[int, int]] = []  # (kind, payload)
        pos = 0
        for lm in range(self.W):
            for _ in range(self.period_sizes[lm]):
                self.events.append((0, pos))
                pos += 1
            self.events.append((1, lm))

        # Mutable search state.
        self.cap = [[r] * S for _ in range(self.W)]
        self.user_used = [[False] * U for _ in range(self.W)]
        self.gs_in = [0] * self.W
        self.served = [0] * len(self.windows)
        self.assignment = [0] * len(self.vinfo)
        self.best_value: float = _NEG_INF
        self.best_assignment: list[int] | None = None
        self.explored = 0
        self.deadline = (time.monotonic() + params.time_limit
                         if params.time_limit is not None else None)
        self.out_of_budget = False
        self.hard_blocked: set[tuple[int, int]] = set()

    # -- helpers ----------------------------------------------------------

    def window_certainly_unserved(self, wi: int, lm: int, k: int) -> bool:
        """No service yet and no remaining chance at or after (lm, k)."""
        ui, span, _ = self.windows[wi]
        if self.served[wi]:
            return False
        for m in span:
            if m < lm:
                continue
            if m == lm:
                if (self.sfx_user[lm][k][ui] > 0
                        and not self.user_used[lm][ui]):
                    return False
            elif self.static_user_possible[ui][m]:
                return False
        return True

    def bound(self, lm: int, k: int, satsat: int, pen_units: int) -> float:
        """Admissible upper bound on the final objective from this node."""
        S = len(self.sats)
        cap_m = self.cap[lm]
        avail = excess = 0
        for sk in range(S):
            a = cap_m[sk]
            d = self.sfx_satdeg[lm][k][sk]
            if d < a:
                excess += a - d
                a = d
            avail += a
        gs_need = self.floor - self.gs_in[lm]
        if gs_need < 0:
            gs_need = 0
        gs_possible = sum(min(cap_m[sk], self.sfx_gs[lm][k][sk])
                          for sk in range(S))
        unavoid = max(0, gs_need - gs_possible)
        reserve = gs_need - unavoid

        forced = 0
        certain = 0
        pending_spans: list[tuple[int, int, int]] = []
        for wi, (ui, span, _) in enumerate(self.windows):
            if self.served[wi] or span[-1] < lm:
                continue
            servable_now = (lm in span
                            and self.sfx_user[lm][k][ui] > 0
                            and not self.user_used[lm][ui]
                            and any(cap_m[sk] > 0
                                    for sk in self.user_sats[ui][lm]))
            servable_future = any(m > lm and self.static_user_possible[ui][m]
                                  for m in span)
            if not servable_now and not servable_future:
                certain += 1
            elif span[-1] == lm:
                forced += 1
            else:
                pending_spans.append((ui, max(span[0], lm), span[-1]))

        cnt = self.sfx_satcnt[lm][k]
        need = reserve + forced
        eff = need - excess
        if eff < 0:
            eff = 0
        a_ub = (avail - eff) // 2
        if a_ub > cnt:
            a_ub = cnt
        if a_ub < 0:
            a_ub = 0
        a_obj: float
        if need > avail + excess:
            a_obj = _NEG_INF
        else:
            a_obj = a_ub - self.P * (unavoid + certain)
        b_obj = min(avail // 2, cnt) - self.P * (unavoid + certain + 1)
        r1 = max(a_obj, b_obj) + self.sfb[lm + 1]

        # Global capacity bound across the whole remaining range: pending
        # windows each reserve one service unit, taken disjointly per user.
        pending = 0
        by_user: dict[int, int] = {}
        pending_spans.sort(key=lambda t: (t[0], t[2]))
        for ui, start, end in pending_spans:
            if by_user.get(ui, -1) < start:
                pending += 1
                by_user[ui] = end
        g_avail = avail + self.static_avail_sfx[lm + 1]
        g_excess = excess + self.static_excess_sfx[lm + 1]
        g_reserve = (reserve + forced + pending
                     + self.static_gsres_sfx[lm + 1])
        g_pen = unavoid + certain + self.static_unavoid_sfx[lm + 1]
        g_cnt = cnt + self.static_satcnt_sfx[lm + 1]
        g_eff = max(0, g_reserve - g_excess)
        g_a: float
        if g_reserve > g_avail + g_excess:
            g_a = _NEG_INF
        else:
            g_a = max(0, min((g_avail - g_eff) // 2, g_cnt)) \
                - self.P * g_pen
        g_b = min(g_avail // 2, g_cnt) - self.P * (g_pen + 1)
        r2 = max(g_a, g_b)

        return satsat - self.P * pen_units + min(r1, r2)

    # -- search ------------------------------------------------------------

    def run(self) -> None:
        self.seed_greedy()
        try:
            self.dfs(0, 0, 0)
        except _Exhausted:
            self.out_of_budget = True

    def dfs(self, eidx: int, satsat: int, pen_units: int) -> None:
        if eidx == len(self.events):
            value = satsat - self.P * pen_units
            if value > self.best_value or self.best_assignment is None:
                self.best_value = value
                self.best_assignment = list(self.assignment)
            return
        etype, payload = self.events[eidx]
        if etype == 1:  # period end
            lm = payload
            deficit = max(0, self.floor - self.gs_in[lm])
            unserved = [wi for wi in self.windows_by_last[lm]
                        if self.served[wi] == 0]
            if unserved and not self.params.soft_access:
                for wi in unserved:
                    _, _, w = self.windows[wi]
                    self.hard_blocked.add((w.user, w.start))
                return
            pen_next = pen_units + deficit + len(unserved)
            if lm + 1 < self.W and self.bound(lm + 1, 0, satsat,
                                              pen_next) <= self.best_value:
                return
            self.dfs(eidx + 1, satsat, pen_next)
            return

        pos = payload
        lm, k, i, j, kind, fixed = self.vinfo[pos]
        if fixed >= 0:
            if fixed == 1 and not self._can_take(lm, i, j):
                return
            if fixed == 1:
                self._apply(lm, i, j, kind, pos)
                self.dfs(eidx + 1,
                         satsat + (1 if kind == 0 else 0), pen_units)
                self._undo(lm, i, j, kind, pos)
            else:
                self.dfs(eidx + 1, satsat, pen_units)
            return

        self.explored += 1
        if self.explored > self.params.node_budget:
            raise _Exhausted
        if self.deadline is not None and self.explored % 4096 == 0 \
                and time.monotonic() > self.deadline:
            raise _Exhausted
        if self.bound(lm, k, satsat, pen_units) <= self.best_value:
            return
        if self._can_take(lm, i, j):
            self._apply(lm, i, j, kind, pos)
            self.dfs(eidx + 1, satsat + (1 if kind == 0 else 0), pen_units)
            self._undo(lm, i, j, kind, pos)
        self.dfs(eidx + 1, satsat, pen_units)

    def _can_take(self, lm: int, i: int, j: int) -> bool:
        for v in (i, j):
            if v in self.sat_idx:
                if self.cap[lm][self.sat_idx[v]] < 1:
                    return False
            elif v in self.user_idx:
                if self.user_used[lm][self.user_idx[v]]:
                    return False
        return True

    def _apply(self, lm: int, i: int, j: int, kind: int, pos: int) -> None:
        self.assignment[pos] = 1
        for v in (i, j):
            if v in self.sat_idx:
                self.cap[lm][self.sat_idx[v]] -= 1
        if kind == 1:
            self.gs_in[lm] += 1
        elif kind == 2:
            u = i if i in self.user_idx else j
            ui = self.user_idx[u]
            self.user_used[lm][ui] = True
            for wi in self.windows_by_user[ui]:
                if lm in self.windows[wi][1]:
                    self.served[wi] += 1

    def _undo(self, lm: int, i: int, j: int, kind: int, pos: int) -> None:
        self.assignment[pos] = 0
        for v in (i, j):
            if v in self.sat_idx:
                self.cap[lm][self.sat_idx[v]] += 1
        if kind == 1:
            self.gs_in[lm] -= 1
        elif kind == 2:
            u = i if i in self.user_idx else j
            ui = self.user_idx[u]
            self.user_used[lm][ui] = False
            for wi in self.windows_by_user[ui]:
                if lm in self.windows[wi][1]:
                    self.served[wi] -= 1

    def evaluate(self, assignment: Sequence[int]) -> tuple[int, bool]:
        """Objective of a complete assignment, and whether it honors hard
        access semantics. Mirrors the leaf accounting of the search."""
        satsat = 0
        gs_in = [0] * self.W
        served = [0] * len(self.windows)
        for pos, value in enumerate(assignment):
            if not value:
                continue
            lm, _, i, j, kind, _ = self.vinfo[pos]
            if kind == 0:
                satsat += 1
            elif kind == 1:
                gs_in[lm] += 1
            else:
                u = i if i in self.user_idx else j
                ui = self.user_idx[u]
                for wi in self.windows_by_user[ui]:
                    if lm in self.windows[wi][1]:
                        served[wi] += 1
        pen = sum(max(0, self.floor - g) for g in gs_in)
        unserved = sum(1 for count in served if count == 0)
        return satsat - self.P * (pen + unserved), unserved == 0

    def seed_greedy(self) -> None:
        """Prime the incumbent with the better of two greedy passes.

        The lazy pass serves only last-chance users (maximizing room for
        inter-satellite links); the eager pass spreads user service across
        all pending windows, which stays feasible under heavy contention.
        The search then keeps the first strictly improving assignment in
        canonical order, so results stay deterministic even when the node
        budget cuts the search short.
        """
        for eager in (False, True):
            assignment = self._greedy_assignment(eager)
            value, feasible = self.evaluate(assignment)
            if feasible or self.params.soft_access:
                if value > self.best_value:
                    self.best_value = value
                    self.best_assignment = assignment

    def _greedy_assignment(self, eager: bool) -> list[int]:
        cap = [list(row) for row in self.cap]
        user_used = [list(row) for row in self.user_used]
        gs_in = list(self.gs_in)
        served = [0] * len(self.windows)
        assignment = [0] * len(self.vinfo)
        vars_by_period: list[list[int]] = [[] for _ in range(self.W)]
        for pos, info in enumerate(self.vinfo):
            vars_by_period[info[0]].append(pos)

        def serve(lm: int, ui: int) -> bool:
            for pos in vars_by_period[lm]:
                _, _, i, j, kind, fixed = self.vinfo[pos]
                if kind != 2 or fixed >= 0 or assignment[pos]:
                    continue
                s, u = (i, j) if i in self.sat_idx else (j, i)
                if self.user_idx[u] != ui or user_used[lm][ui]:
                    continue
                if cap[lm][self.sat_idx[s]] < 1:
                    continue
                assignment[pos] = 1
                cap[lm][self.sat_idx[s]] -= 1
                user_used[lm][ui] = True
                for wi in self.windows_by_user[ui]:
                    if lm in self.windows[wi][1]:
                        served[wi] += 1
                return True
            return False

        for lm in range(self.W):
            for pos in vars_by_period[lm]:
                _, _, i, j, kind, fixed = self.vinfo[pos]
                if fixed < 0:
                    continue
                assignment[pos] = fixed
                if fixed == 1:
                    for v in (i, j):
                        if v in self.sat_idx:
                            cap[lm][self.sat_idx[v]] -= 1
                    if kind == 1:
                        gs_in[lm] += 1
                    elif kind == 2:
                        u = i if i in self.user_idx else j
                        ui = self.user_idx[u]
                        user_used[lm][ui] = True
                        for wi in self.windows_by_user[ui]:
                            if lm in self.windows[wi][1]:
                                served[wi] += 1
            for wi in self.windows_by_last[lm]:
                if served[wi] == 0:
                    serve(lm, self.windows[wi][0])
            for pos in vars_by_period[lm]:
                _, _, i, j, kind, fixed = self.vinfo[pos]
                if kind != 1 or fixed >= 0 or gs_in[lm] >= self.floor:
                    continue
                s = i if i in self.sat_idx else j
                if cap[lm][self.sat_idx[s]] < 1:
                    continue
                assignment[pos] = 1
                cap[lm][self.sat_idx[s]] -= 1
                gs_in[lm] += 1
            if eager:
                # serve every user whose pending window covers this period,
                # nearest deadline first
                pending = sorted(
                    (self.windows[wi][1][-1], self.windows[wi][0])
                    for wi in range(len(self.windows))
                    if served[wi] == 0 and lm in self.windows[wi][1])
                for _, ui in pending:
                    if not user_used[lm][ui]:
                        serve(lm, ui)
            for pos in vars_by_period[lm]:
                _, _, i, j, kind, fixed = self.vinfo[pos]
                if kind != 0 or fixed >= 0:
                    continue
                si, sj = self.sat_idx[i], self.sat_idx[j]
                if cap[lm][si] < 1 or cap[lm][sj] < 1:
                    continue
                assignment[pos] = 1
                cap[lm][si] -= 1
                cap[lm][sj] -= 1
        return assignment


class _Exhausted(Exception):
    pass


def solve(model: IlpModel, params: RcpdParams | None = None) -> SolveResult:
    """Branch-and-bound solve of one window model.

    Deterministic for identical inputs. Raises ``InfeasibleAccessError``
    under hard access semantics when no assignment can serve every window;
    when the node budget (or optional time limit) runs out, returns the best
    incumbent with ``optimal`` False.
    """
    params = params or model.params
    search = _Search(model, params)
    search.run()
    if search.best_assignment is None:
        if search.hard_blocked:
            raise InfeasibleAccessError(sorted(search.hard_blocked))
        raise RuntimeError("search budget exhausted before any feasible "
                           "assignment was found; raise node_budget")
    assignment = tuple(search.best_assignment)
    unserved = _unserved_windows(model, assignment)
    return SolveResult(assignment, int(search.best_value),
                       not search.out_of_budget, search.explored,
                       unserved)


def _unserved_windows(model: IlpModel,
                      assignment: Sequence[int]) -> tuple[tuple[int, int], ...]:
    served_by_user: dict[int, set[int]] = {u: set() for u in model.user_ids}
    for var, value in zip(model.variables, assignment):
        if value and var.kind == "sat-user":
            u = var.i if var.i in served_by_user else var.j
            served_by_user[u].add(var.period)
    out = []
    for w in list(model.windows) + list(model.dropped_windows):
        if not served_by_user[w.user] & set(w.periods):
            out.append((w.user, w.start))
    return tuple(sorted(out))


def plan_horizon(vis: VisibilitySet, nodes: Sequence[Node],
                 params: RcpdParams) -> ReflectorPlan:
    """Plan the whole horizon as overlapping rolling windows.

    Consecutive windows overlap by ``access_window - 1`` periods whose
    decisions are fixed from the previous solve, so every sliding access
    window lies wholly inside exactly one solve. With ``horizon >= period
    count`` this degenerates to a single joint solve.
    """
    total = vis.period_count
    f = params.access_window
    h = max(min(params.horizon, total), min(f, total))
    n = vis.period_vis.shape[1]
    links = np.zeros((total, n, n), dtype=bool)

    start = 0
    unmet: set[tuple[int, int]] = set()
    while True:
        end = min(start + h, total)
        window = range(start, end)
        fixed: dict[int, frozenset[tuple[int, int]]] = {}
        if start > 0:
            for m in range(start, min(start + f - 1, end)):
                pairs = frozenset(
                    (int(a), int(b))
                    for a, b in zip(*np.nonzero(np.triu(links[m], k=1))))
                fixed[m] = pairs
        model = build_model(vis, nodes, params, window, fixed)
        result = solve(model, params)
        for var, value in zip(model.variables, result.assignment):
            links[var.period, var.i, var.j] = bool(value)
            links[var.period, var.j, var.i] = bool(value)
        unmet.update(result.unserved_windows)
        if end == total:
            break
        start = end - (f - 1)

    sats = satellite_ids(nodes)
    gss = ground_station_ids(nodes)
    deficits = np.array(
        [max(0, params.gs_link_floor
             - sum(int(links[m, s, g]) for s in sats for g in gss))
         for m in range(total)], dtype=np.int64)
    return ReflectorPlan(links, params, deficits, tuple(sorted(unmet)))
