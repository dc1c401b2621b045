"""Earth-Moon rotating-frame geometry and visibility computation.

Dynamics are the circular restricted three-body problem in nondimensional
rotating-frame units (distance unit = Earth-Moon separation, time unit chosen
so the frame rotates at 1 rad per unit). Ground stations ride a spherical
Earth spinning at the sidereal rate relative to the frame. Visibility between
two nodes at an instant requires an unobstructed line of sight past both
primaries plus both endpoints' pointing cones; spacecraft boresights track the
Earth's center, ground stations look up from zenith.

Slot-level visibility is the conjunction of all slot-midpoint samples inside a
superframe, and period-level visibility the conjunction over the whole period,
matching the static-topology semantics reflector planning assumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (Node, NodeKind, PlanViolation, TimeGrid, VisibilitySet,
                   pl_eligible, rl_eligible)

GM_EARTH_KM3S2 = 398600.4418
GM_MOON_KM3S2 = 4902.800066
#: Earth-Moon mass ratio (mass parameter of the smaller primary).
MU = GM_MOON_KM3S2 / (GM_EARTH_KM3S2 + GM_MOON_KM3S2)
#: Distance unit in km and the matching time unit in seconds.
LU_KM = 389703.0
TU_S = math.sqrt(LU_KM ** 3 / (GM_EARTH_KM3S2 + GM_MOON_KM3S2))

R_EARTH_KM = 6371.0
R_MOON_KM = 1737.4
R_EARTH = R_EARTH_KM / LU_KM
R_MOON = R_MOON_KM / LU_KM

_SIDEREAL_DAY_S = 86164.0905
#: Earth spin rate relative to the rotating frame, rad per time unit.
EARTH_SPIN = 2.0 * math.pi / _SIDEREAL_DAY_S * TU_S - 1.0

EARTH_CENTER = np.array([-MU, 0.0, 0.0])
MOON_CENTER = np.array([1.0 - MU, 0.0, 0.0])

#: Default integrator step in time units (about 6.4 minutes).
DEFAULT_STEP = 1e-3


class PropagationError(RuntimeError):
    """State became non-finite mid-integration (e.g. a pass through a
    primary's singularity)."""


@dataclass(frozen=True)
class Cr3bpState:
    """Rotating-frame state at a nondimensional epoch."""

    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    mu: float = MU
    epoch: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.mu < 0.5:
            raise ValueError("mass ratio must lie in (0, 0.5)")
        values = (*self.position, *self.velocity, self.epoch)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("state components must be finite")

    def vector(self) -> np.ndarray:
        return np.array([*self.position, *self.velocity], dtype=float)

    @classmethod
    def from_vector(cls, vec: Sequence[float], mu: float = MU,
                    epoch: float = 0.0) -> "Cr3bpState":
        v = [float(x) for x in vec]
        return cls((v[0], v[1], v[2]), (v[3], v[4], v[5]), mu, epoch)


@dataclass(frozen=True)
class PointingSpec:
    """Half-cone widths for each terminal family, in degrees.

    Ground stations measure from zenith, so the default 85 degrees is a
    5-degree minimum elevation mask.
    """

    rl_half_cone_deg: float = 75.0
    pl_half_cone_deg: float = 75.0
    gs_half_cone_deg: float = 85.0

    def __post_init__(self) -> None:
        for value in (self.rl_half_cone_deg, self.pl_half_cone_deg,
                      self.gs_half_cone_deg):
            if not 0.0 < value <= 90.0:
                raise ValueError("half-cone angles must lie in (0, 90]")


def _accel(pos: np.ndarray, vel: np.ndarray, mu: float) -> np.ndarray:
    """Rotating-frame acceleration; ``pos``/``vel`` shaped (..., 3)."""
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    r1 = np.sqrt((x + mu) ** 2 + y ** 2 + z ** 2)
    r2 = np.sqrt((x - 1.0 + mu) ** 2 + y ** 2 + z ** 2)
    r13 = r1 ** 3
    r23 = r2 ** 3
    ax = x + 2.0 * vel[..., 1] - (1.0 - mu) * (x + mu) / r13 \
        - mu * (x - 1.0 + mu) / r23
    ay = y - 2.0 * vel[..., 0] - (1.0 - mu) * y / r13 - mu * y / r23
    az = -(1.0 - mu) * z / r13 - mu * z / r23
    return np.stack([ax, ay, az], axis=-1)


def _deriv(state: np.ndarray, mu: float) -> np.ndarray:
    pos, vel = state[..., :3], state[..., 3:]
    return np.concatenate([vel, _accel(pos, vel, mu)], axis=-1)


def _rk4_step(state: np.ndarray, h: float, mu: float) -> np.ndarray:
    k1 = _deriv(state, mu)
    k2 = _deriv(state + 0.5 * h * k1, mu)
    k3 = _deriv(state + 0.5 * h * k2, mu)
    k4 = _deriv(state + h * k3, mu)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _march(states: np.ndarray, dt: float, max_step: float,
           mu: float) -> np.ndarray:
    """Advance a batch of states by ``dt`` with fixed steps <= max_step."""
    if dt == 0.0:
        return states
    n_steps = max(1, int(math.ceil(abs(dt) / max_step)))
    h = dt / n_steps
    for _ in range(n_steps):
        states = _rk4_step(states, h, mu)
    if not np.all(np.isfinite(states)):
        raise PropagationError(
            "integration produced a non-finite state; the trajectory likely "
            "passed too close to a primary for the chosen step")
    return states


def propagate(state: Cr3bpState, dt: float,
              step: float = DEFAULT_STEP) -> Cr3bpState:
    """Advance ``state`` by ``dt`` time units with a fixed-step RK4."""
    if step <= 0.0:
        raise ValueError("step must be positive")
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    vec = _march(state.vector(), dt, step, state.mu)
    return Cr3bpState.from_vector(vec, state.mu, state.epoch + dt)


def jacobi_constant(state: Cr3bpState) -> float:
    x, y, z = state.position
    vx, vy, vz = state.velocity
    mu = state.mu
    r1 = math.sqrt((x + mu) ** 2 + y ** 2 + z ** 2)
    r2 = math.sqrt((x - 1.0 + mu) ** 2 + y ** 2 + z ** 2)
    u = 0.5 * (x ** 2 + y ** 2) + (1.0 - mu) / r1 + mu / r2
    return 2.0 * u - (vx ** 2 + vy ** 2 + vz ** 2)


def libration_point(name: str, mu: float = MU) -> np.ndarray:
    """Equilibrium position for ``L1``..``L5``."""
    label = name.upper()
    if label == "L4":
        return np.array([0.5 - mu, math.sqrt(3.0) / 2.0, 0.0])
    if label == "L5":
        return np.array([0.5 - mu, -math.sqrt(3.0) / 2.0, 0.0])
    guesses = {"L1": 0.84, "L2": 1.16, "L3": -1.01}
    if label not in guesses:
        raise ValueError(f"unknown libration point {name!r}")

    def fx(x: float) -> float:
        r1 = abs(x + mu)
        r2 = abs(x - 1.0 + mu)
        return (x - (1.0 - mu) * (x + mu) / r1 ** 3
                - mu * (x - 1.0 + mu) / r2 ** 3)

    x = guesses[label]
    for _ in range(100):
        d = 1e-8
        step = fx(x) / ((fx(x + d) - fx(x - d)) / (2.0 * d))
        x -= step
        if abs(step) < 1e-14:
            break
    return np.array([x, 0.0, 0.0])


# ---------------------------------------------------------------------------
# Orbit catalog
# ---------------------------------------------------------------------------

def load_orbit_catalog(source: str | Path | Mapping) -> dict[str, np.ndarray]:
    """Resolve an orbit catalog into epoch-0 state vectors.

    The catalog is a JSON mapping of orbit id to one of:

    - ``{"type": "libration_point", "point": "L4"}`` (rest at the point),
    - ``{"type": "state", "state": [x,y,z,vx,vy,vz], "period": p}``,
    - ``{"type": "state_phase", "base": id, "phase": 0.25}`` (the base orbit
      advanced by a fraction of its period).
    """
    if isinstance(source, Mapping):
        raw = dict(source)
    else:
        raw = json.loads(Path(source).read_text())
    if "orbits" in raw:
        raw = raw["orbits"]

    states: dict[str, np.ndarray] = {}
    periods: dict[str, float] = {}
    deferred: list[tuple[str, Mapping]] = []
    for orbit_id, entry in raw.items():
        kind = entry.get("type")
        if kind == "libration_point":
            pos = libration_point(entry["point"])
            states[orbit_id] = np.concatenate([pos, np.zeros(3)])
        elif kind == "state":
            vec = np.asarray(entry["state"], dtype=float)
            if vec.shape != (6,):
                raise ValueError(f"orbit {orbit_id!r}: state must have six "
                                 "components")
            states[orbit_id] = vec
            if entry.get("period"):
                periods[orbit_id] = float(entry["period"])
        elif kind == "state_phase":
            deferred.append((orbit_id, entry))
        else:
            raise ValueError(f"orbit {orbit_id!r}: unknown type {kind!r}")

    for orbit_id, entry in deferred:
        base = entry["base"]
        if base not in states:
            raise ValueError(f"orbit {orbit_id!r}: unknown base {base!r}")
        if base not in periods:
            raise ValueError(f"orbit {orbit_id!r}: base {base!r} has no "
                             "period to phase against")
        dt = float(entry["phase"]) * periods[base]
        vec = _march(states[base].copy(), dt, DEFAULT_STEP, MU)
        states[orbit_id] = vec
    return states


def default_orbit_catalog() -> dict[str, np.ndarray]:
    path = Path(__file__).parent / "data" / "orbits.json"
    return load_orbit_catalog(path)


# ---------------------------------------------------------------------------
# Position sampling
# ---------------------------------------------------------------------------

def sample_orbit_positions(initial: np.ndarray, times: np.ndarray,
                           step: float = DEFAULT_STEP) -> np.ndarray:
    """Positions of a batch of orbits at ascending sample times.

    ``initial`` has shape (K, 6) at epoch 0; the result has shape
    (K, len(times), 3).
    """
    initial = np.atleast_2d(np.asarray(initial, dtype=float))
    out = np.empty((initial.shape[0], len(times), 3))
    state = initial.copy()
    t_prev = 0.0
    for idx, t in enumerate(times):
        if t < t_prev:
            raise ValueError("sample times must be ascending")
        state = _march(state, float(t) - t_prev, step, MU)
        t_prev = float(t)
        out[:, idx, :] = state[:, :3]
    return out


def ground_positions(lat_deg: float, lon_deg: float,
                     times: np.ndarray) -> np.ndarray:
    """Rotating-frame positions of a ground station at sample times.

    Longitudes are referenced so that at scenario epoch the zero meridian
    faces the Moon (+x); the Earth's spin axis is taken along +z.
    """
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    theta = lon + EARTH_SPIN * np.asarray(times, dtype=float)
    clat = math.cos(lat)
    return EARTH_CENTER + R_EARTH * np.stack(
        [clat * np.cos(theta), clat * np.sin(theta),
         np.full_like(theta, math.sin(lat))], axis=-1)


# ---------------------------------------------------------------------------
# Visibility
# ---------------------------------------------------------------------------

def _segment_blocked(p1: np.ndarray, p2: np.ndarray, center: np.ndarray,
                     radius: float) -> np.ndarray:
    """True where the p1->p2 segment dips inside the sphere (vectorized).

    The test radius is shrunk by a relative epsilon so that an endpoint
    sitting exactly on the sphere (a ground station) never self-occludes
    through rounding.
    """
    v = p2 - p1
    w = center - p1
    vv = np.einsum("...i,...i->...", v, v)
    t = np.clip(np.einsum("...i,...i->...", w, v) / np.maximum(vv, 1e-300),
                0.0, 1.0)
    closest = p1 + t[..., None] * v
    dist2 = np.einsum("...i,...i->...", closest - center, closest - center)
    r_eff = radius * (1.0 - 1e-9)
    return dist2 < r_eff * r_eff


def _cone_ok(own: np.ndarray, other: np.ndarray, boresight: np.ndarray,
             half_cone_deg: float) -> np.ndarray:
    d = other - own
    d_norm = np.linalg.norm(d, axis=-1)
    b_norm = np.linalg.norm(boresight, axis=-1)
    cosang = np.einsum("...i,...i->...", d, boresight) \
        / np.maximum(d_norm * b_norm, 1e-300)
    return cosang >= math.cos(math.radians(half_cone_deg))


def _sample_times(grid: TimeGrid) -> np.ndarray:
    """Slot-midpoint epochs for the whole horizon, in time units."""
    idx = np.arange(grid.total_slots, dtype=float)
    return (idx + 0.5) * grid.slot_seconds / TU_S


def _node_positions(nodes: Sequence[Node],
                    orbit_states: Mapping[str, np.ndarray],
                    times: np.ndarray, step: float) -> np.ndarray:
    orbit_nodes = [n for n in nodes
                   if n.kind is not NodeKind.GROUND_STATION]
    for n in nodes:
        if n.trajectory is None:
            raise ValueError(f"node {n.id} has no trajectory reference")
    missing = [n.trajectory for n in orbit_nodes
               if n.trajectory not in orbit_states]
    if missing:
        raise ValueError(f"unknown orbit ids: {sorted(set(missing))}")

    pos = np.empty((len(nodes), len(times), 3))
    if orbit_nodes:
        initial = np.stack([orbit_states[n.trajectory] for n in orbit_nodes])
        sampled = sample_orbit_positions(initial, times, step)
        for row, n in enumerate(orbit_nodes):
            pos[n.id] = sampled[row]
    for n in nodes:
        if n.kind is NodeKind.GROUND_STATION:
            lat, lon = n.trajectory
            pos[n.id] = ground_positions(lat, lon, times)
    return pos


def compute_visibility(nodes: Sequence[Node], grid: TimeGrid,
                       pointing: PointingSpec,
                       orbit_states: Mapping[str, np.ndarray],
                       step: float = DEFAULT_STEP) -> VisibilitySet:
    """Sampled visibility for every link-eligible pair.

    One sample per slot midpoint; a superframe entry is true only when every
    sample inside it passes, and a period entry only when every sample in the
    period does.
    """
    times = _sample_times(grid)
    pos = _node_positions(nodes, orbit_states, times, step)
    n = len(nodes)
    m = grid.period_count
    sf = grid.superframes_per_period
    t_slots = grid.slots_per_superframe

    zenith = pos - EARTH_CENTER  # only meaningful for ground stations
    earthward = EARTH_CENTER - pos

    def cone_mask(node: Node, other_pos: np.ndarray,
                  family_deg: float) -> np.ndarray:
        if node.kind is NodeKind.GROUND_STATION:
            return _cone_ok(pos[node.id], other_pos, zenith[node.id],
                            pointing.gs_half_cone_deg)
        return _cone_ok(pos[node.id], other_pos, earthward[node.id],
                        family_deg)

    period_vis = np.zeros((m, n, n), dtype=bool)
    slot_vis = np.zeros((m, sf, n, n), dtype=bool)
    for a in nodes:
        for b in nodes:
            if b.id <= a.id:
                continue
            is_rl = rl_eligible(a, b)
            is_pl = pl_eligible(a, b)
            if not (is_rl or is_pl):
                continue
            clear = ~(_segment_blocked(pos[a.id], pos[b.id], EARTH_CENTER,
                                       R_EARTH)
                      | _segment_blocked(pos[a.id], pos[b.id], MOON_CENTER,
                                         R_MOON))
            if is_rl:
                ok = (clear
                      & cone_mask(a, pos[b.id], pointing.rl_half_cone_deg)
                      & cone_mask(b, pos[a.id], pointing.rl_half_cone_deg))
                per = ok.reshape(m, sf * t_slots).all(axis=1)
                period_vis[:, a.id, b.id] = period_vis[:, b.id, a.id] = per
            if is_pl:
                ok = (clear
                      & cone_mask(a, pos[b.id], pointing.pl_half_cone_deg)
                      & cone_mask(b, pos[a.id], pointing.pl_half_cone_deg))
                per_sf = ok.reshape(m, sf, t_slots).all(axis=2)
                slot_vis[:, :, a.id, b.id] = per_sf
                slot_vis[:, :, b.id, a.id] = per_sf
    return VisibilitySet(period_vis, slot_vis)


# ---------------------------------------------------------------------------
# Visibility trace override
# ---------------------------------------------------------------------------

def load_visibility_trace(source: str | Path | Sequence[tuple],
                          nodes: Sequence[Node],
                          grid: TimeGrid) -> VisibilitySet:
    """Build a VisibilitySet from explicit (i, j, start_slot, end_slot) rows.

    Slot bounds are inclusive global slot indices. Rows for pairs that can
    never carry a link are ignored, so traces can be written generously. A
    superframe or period is visible only when the intervals cover every one
    of its slots (same conjunction rule as the sampled geometry).
    """
    if isinstance(source, (str, Path)):
        rows = []
        for line in Path(source).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"trace rows need 4 fields, got: {line!r}")
            rows.append(tuple(int(p) for p in parts))
    else:
        rows = [tuple(int(v) for v in row) for row in source]

    n = len(nodes)
    total = grid.total_slots
    covered = np.zeros((n, n, total), dtype=bool)
    for i, j, lo, hi in rows:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"trace references unknown node in ({i}, {j})")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}] for ({i}, {j})")
        lo = max(lo, 0)
        hi = min(hi, total - 1)
        covered[i, j, lo:hi + 1] = True
        covered[j, i, lo:hi + 1] = True

    m = grid.period_count
    sf = grid.superframes_per_period
    t_slots = grid.slots_per_superframe
    by_sf = covered.reshape(n, n, m, sf, t_slots).all(axis=4)
    period_vis = np.zeros((m, n, n), dtype=bool)
    slot_vis = np.zeros((m, sf, n, n), dtype=bool)
    for a in nodes:
        for b in nodes:
            if b.id <= a.id:
                continue
            if rl_eligible(a, b):
                per = by_sf[a.id, b.id].all(axis=1)
                period_vis[:, a.id, b.id] = period_vis[:, b.id, a.id] = per
            if pl_eligible(a, b):
                slot_vis[:, :, a.id, b.id] = by_sf[a.id, b.id]
                slot_vis[:, :, b.id, a.id] = by_sf[a.id, b.id]
    return VisibilitySet(period_vis, slot_vis)
