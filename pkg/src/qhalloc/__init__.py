"""Partitioning and allocation engine for multi-tenant quantum hardware."""

from .allocators import (
    AllocationPlan,
    Partition,
    allocate_attractor,
    allocate_comdap,
    allocate_cri_greedy,
    densest_subset,
)
from .circuits import ProgramProfile, interaction_graph, parse_qasm
from .community import HierarchyTree, build_hierarchy, find_candidates, louvain, modularity_gain
from .metrics import cfm, compactness, cri, cri_single, density
from .routing import Mapping, RoutingReport, initial_mapping, route
from .secure import (
    CrosstalkModel,
    allocate_comdap_secure_general,
    allocate_comdap_secure_smart,
    generate_crosstalk_configs,
    is_significant,
)
from .topology import HardwareGraph, generate_topology, load_snapshot, save_snapshot, subgraph

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "CrosstalkModel",
    "HardwareGraph",
    "HierarchyTree",
    "Mapping",
    "Partition",
    "ProgramProfile",
    "RoutingReport",
    "allocate_attractor",
    "allocate_comdap",
    "allocate_comdap_secure_general",
    "allocate_comdap_secure_smart",
    "allocate_cri_greedy",
    "build_hierarchy",
    "cfm",
    "compactness",
    "cri",
    "cri_single",
    "densest_subset",
    "density",
    "find_candidates",
    "generate_crosstalk_configs",
    "generate_topology",
    "initial_mapping",
    "interaction_graph",
    "is_significant",
    "load_snapshot",
    "louvain",
    "modularity_gain",
    "parse_qasm",
    "route",
    "save_snapshot",
    "subgraph",
]
