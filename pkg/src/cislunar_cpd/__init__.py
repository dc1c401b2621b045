"""Contact plan design and evaluation for cislunar relay constellations."""

from .core import (Node, NodeKind, PhasedArrayPlan, PlanViolation,
                   ReflectorPlan, TimeGrid, TopologyPartition, VisibilitySet,
                   ground_station, p_user, partition_topology, r_user,
                   satellite, validate_reflector_plan)

__all__ = [
    "Node", "NodeKind", "PhasedArrayPlan", "PlanViolation", "ReflectorPlan",
    "TimeGrid", "TopologyPartition", "VisibilitySet", "ground_station",
    "p_user", "partition_topology", "r_user", "satellite",
    "validate_reflector_plan",
]
