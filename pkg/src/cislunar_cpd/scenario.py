"""Scenario ingestion: JSON file to validated domain objects.

A scenario file names the node population (satellite orbits, user orbits or
counts over an orbit cycle, ground-station coordinates), the time grid,
planner parameters, and which planner combinations to run. Field errors
raise ``ScenarioError`` naming the offending field so the command line can
report them distinctly from file-parsing failures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .baselines import BaselineConfig
from .core import (Node, TimeGrid, ground_station, p_user, r_user, satellite)
from .geometry import PointingSpec, default_orbit_catalog, load_orbit_catalog
from .pcpd import WeightParams
from .rcpd import RcpdParams

R_SCHEMES = ("rcpd", "laapmm")
P_SCHEMES = ("pcpd", "dfcp")

DEFAULT_USER_ORBIT_CYCLE = (
    "usr_l1", "usr_dro26", "usr_elfo_a", "usr_incl_a", "usr_polar_b",
    "usr_dro26_q1", "usr_nrho_a", "usr_dro65_q1", "usr_l2", "usr_dro26_q2",
    "usr_elfo_b", "usr_incl_b", "usr_polar_a", "usr_dro26_q3",
    "usr_dro65_q2", "usr_dro65_q3",
)

DEFAULT_GROUND_STATIONS = (
    ("jiamusi", 46.8, 130.3),
    ("kashi", 39.47, 75.99),
    ("sanya", 18.23, 109.02),
)


class ScenarioError(ValueError):
    """A scenario field is missing, mistyped, or inconsistent."""


@dataclass(frozen=True)
class Scenario:
    """A fully validated experiment description."""

    name: str
    seed: int
    grid: TimeGrid
    pointing: PointingSpec
    sat_orbits: tuple[str, ...]
    r_user_orbits: tuple[str, ...]
    p_user_orbits: tuple[str, ...]
    ground_stations: tuple[tuple[str, float, float], ...]
    reflector: RcpdParams
    phased_array: WeightParams
    baseline: BaselineConfig
    schemes: tuple[tuple[str, str], ...]
    visibility_mode: str = "geometry"
    visibility_trace: str | None = None
    orbit_catalog_path: str | None = None
    user_orbit_cycle: tuple[str, ...] = DEFAULT_USER_ORBIT_CYCLE

    def nodes(self) -> list[Node]:
        """Dense-id node list: satellites, R-users, P-users, stations."""
        out: list[Node] = []
        for orbit in self.sat_orbits:
            out.append(satellite(len(out), self.reflector.reflectors_per_sat,
                                 orbit))
        for orbit in self.r_user_orbits:
            out.append(r_user(len(out), orbit))
        for orbit in self.p_user_orbits:
            out.append(p_user(len(out), orbit))
        for _, lat, lon in self.ground_stations:
            out.append(ground_station(len(out), (lat, lon)))
        return out

    def orbit_states(self) -> dict[str, np.ndarray]:
        if self.orbit_catalog_path is None:
            return default_orbit_catalog()
        return load_orbit_catalog(self.orbit_catalog_path)

    def with_population(self, r_users: int | None = None,
                        p_users: int | None = None,
                        gs_link_floor: int | None = None) -> "Scenario":
        """Derived scenario for sweep cells; users drawn from the cycle."""
        changes: dict[str, Any] = {}
        if r_users is not None:
            changes["r_user_orbits"] = tuple(
                self.user_orbit_cycle[i % len(self.user_orbit_cycle)]
                for i in range(r_users))
        if p_users is not None:
            changes["p_user_orbits"] = tuple(
                self.user_orbit_cycle[(i + 3) % len(self.user_orbit_cycle)]
                for i in range(p_users))
        if gs_link_floor is not None:
            changes["reflector"] = replace(self.reflector,
                                           gs_link_floor=gs_link_floor)
        return replace(self, **changes)


def _require(mapping: Mapping, key: str, where: str) -> Any:
    if key not in mapping:
        raise ScenarioError(f"missing field {where}.{key}")
    return mapping[key]


def _build(cls, data: Mapping, where: str, field_map: Mapping[str, str]):
    kwargs = {}
    for json_key, attr in field_map.items():
        if json_key in data:
            kwargs[attr] = data[json_key]
    unknown = set(data) - set(field_map)
    if unknown:
        raise ScenarioError(f"unknown fields in {where}: {sorted(unknown)}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid {where}: {exc}") from exc


def _user_orbits(raw: Any, cycle: Sequence[str], where: str,
                 offset: int = 0) -> tuple[str, ...]:
    if raw is None:
        return ()
    if isinstance(raw, Mapping):
        count = _require(raw, "count", where)
        if not isinstance(count, int) or count < 0:
            raise ScenarioError(f"{where}.count must be a nonnegative "
                                "integer")
        use_cycle = tuple(raw.get("orbit_cycle", cycle))
        if not use_cycle and count:
            raise ScenarioError(f"{where}: empty orbit cycle")
        return tuple(use_cycle[(i + offset) % len(use_cycle)]
                     for i in range(count))
    if isinstance(raw, Sequence):
        out = []
        for k, entry in enumerate(raw):
            if not isinstance(entry, Mapping) or "orbit" not in entry:
                raise ScenarioError(f"{where}[{k}] needs an 'orbit' field")
            out.append(str(entry["orbit"]))
        return tuple(out)
    raise ScenarioError(f"{where} must be a list or a count mapping")


def scenario_from_dict(data: Mapping[str, Any],
                       name: str = "scenario") -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario root must be a JSON object")
    known = {"name", "seed", "grid", "pointing", "satellites", "r_users",
             "p_users", "ground_stations", "reflector", "phased_array",
             "baseline", "schemes", "visibility", "orbit_catalog",
             "user_orbit_cycle"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")

    grid = _build(TimeGrid, {**{"periods": 24}, **data.get("grid", {})},
                  "grid",
                  {"periods": "period_count", "period_minutes":
                   "period_minutes", "superframes_per_period":
                   "superframes_per_period", "switching_superframes":
                   "switching_superframes", "slot_seconds": "slot_seconds"})
    pointing = _build(PointingSpec, data.get("pointing", {}), "pointing",
                      {"rl_half_cone_deg": "rl_half_cone_deg",
                       "pl_half_cone_deg": "pl_half_cone_deg",
                       "gs_half_cone_deg": "gs_half_cone_deg"})
    reflector = _build(RcpdParams, data.get("reflector", {}), "reflector",
                       {"reflectors_per_sat": "reflectors_per_sat",
                        "access_window": "access_window",
                        "gs_link_floor": "gs_link_floor",
                        "penalty": "penalty", "horizon": "horizon",
                        "node_budget": "node_budget",
                        "time_limit": "time_limit",
                        "soft_access": "soft_access"})
    pa_data = dict(data.get("phased_array", {}))
    quotas = pa_data.pop("quotas", {})
    if not isinstance(quotas, Mapping):
        raise ScenarioError("phased_array.quotas must map user id to quota")
    phased = _build(WeightParams,
                    {**pa_data, "quotas": {int(k): int(v)
                                           for k, v in quotas.items()}},
                    "phased_array",
                    {"service_constant": "service_constant",
                     "comm_constant": "comm_constant",
                     "ranging_constant": "ranging_constant",
                     "default_quota": "default_quota",
                     "quotas": "quotas",
                     "distinct_partner_diversity":
                     "distinct_partner_diversity"})
    baseline = _build(BaselineConfig, data.get("baseline", {}), "baseline",
                      {"fairness_gain": "fairness_gain", "seed": "seed"})

    sats_raw = data.get("satellites")
    if not sats_raw:
        raise ScenarioError("missing field satellites (need at least one)")
    sat_orbits = []
    for k, entry in enumerate(sats_raw):
        if not isinstance(entry, Mapping) or "orbit" not in entry:
            raise ScenarioError(f"satellites[{k}] needs an 'orbit' field")
        sat_orbits.append(str(entry["orbit"]))

    cycle = tuple(data.get("user_orbit_cycle", DEFAULT_USER_ORBIT_CYCLE))
    r_orbits = _user_orbits(data.get("r_users"), cycle, "r_users")
    p_orbits = _user_orbits(data.get("p_users"), cycle, "p_users", offset=3)

    gs_raw = data.get("ground_stations")
    if gs_raw is None:
        stations = DEFAULT_GROUND_STATIONS
    else:
        stations = []
        for k, entry in enumerate(gs_raw):
            if not isinstance(entry, Mapping):
                raise ScenarioError(f"ground_stations[{k}] must be an object")
            lat = _require(entry, "lat_deg", f"ground_stations[{k}]")
            lon = _require(entry, "lon_deg", f"ground_stations[{k}]")
            stations.append((str(entry.get("name", f"gs{k}")),
                             float(lat), float(lon)))
        stations = tuple(stations)

    schemes_raw = data.get("schemes", [["rcpd", "pcpd"]])
    schemes = []
    for k, pair in enumerate(schemes_raw):
        if (not isinstance(pair, Sequence) or len(pair) != 2
                or pair[0] not in R_SCHEMES or pair[1] not in P_SCHEMES):
            raise ScenarioError(
                f"schemes[{k}] must be [{'|'.join(R_SCHEMES)}, "
                f"{'|'.join(P_SCHEMES)}]")
        schemes.append((pair[0], pair[1]))

    vis_raw = data.get("visibility", {"mode": "geometry"})
    mode = vis_raw.get("mode", "geometry")
    if mode not in ("geometry", "full", "trace"):
        raise ScenarioError("visibility.mode must be geometry, full, or "
                            "trace")
    trace = vis_raw.get("path")
    if mode == "trace" and not trace:
        raise ScenarioError("visibility.path required for trace mode")

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ScenarioError("seed must be an integer")

    return Scenario(
        name=str(data.get("name", name)), seed=seed, grid=grid,
        pointing=pointing, sat_orbits=tuple(sat_orbits),
        r_user_orbits=r_orbits, p_user_orbits=p_orbits,
        ground_stations=tuple(stations), reflector=reflector,
        phased_array=phased, baseline=baseline, schemes=tuple(schemes),
        visibility_mode=mode, visibility_trace=trace,
        orbit_catalog_path=data.get("orbit_catalog"),
        user_orbit_cycle=cycle)


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file.

    JSON syntax errors propagate as ``json.JSONDecodeError`` (a parse
    failure); content problems raise ``ScenarioError``.
    """
    text = Path(path).read_text()
    data = json.loads(text)
    return scenario_from_dict(data, name=Path(path).stem)
