"""Logical-to-physical mapping and SWAP insertion inside one partition.

The router is deliberately simple and deterministic: gates run in program
order, and a gate on non-adjacent qubits walks its first operand along a
shortest path until the operands touch.  One SWAP costs three CX.  Depth is
greedy as-soon-as-possible layering of the two-qubit schedule (single-qubit
gates carry no recorded positions, so they do not enter the depth figures).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

from .allocators import Partition
from .circuits import ProgramProfile, interaction_graph
from .topology import HardwareGraph, ValidationError

SWAP_CX_COST = 3


@dataclass(frozen=True)
class Mapping:
    """Total bijection logical qubit -> physical qubit within a partition."""

    placement: tuple[tuple[int, int], ...]

    def as_dict(self) -> dict[int, int]:
        return dict(self.placement)


@dataclass(frozen=True)
class RoutingReport:
    swaps_inserted: int
    cx_before: int
    cx_after: int
    depth_before: int
    depth_after: int
    delta_cx_ratio: float
    delta_depth_ratio: float


def initial_mapping(p: ProgramProfile, partition: Partition, g: HardwareGraph) -> Mapping:
    """Deterministic greedy placement.

    Logical qubits are placed in order of descending interaction weight
    (ties: earlier gate activity first), onto the free physical qubit that
    touches the most already-placed partners, preferring higher CFM.
    """
    phys = list(partition.qubits)
    if len(phys) != p.logical_qubits:
        raise ValidationError(
            f"partition size {len(phys)} does not match program size {p.logical_qubits}"
        )
    part_set = frozenset(phys)
    part_adj = {q: g.adjacency[q] & part_set for q in phys}

    def view_cfm(q: int) -> float:
        # CFM restricted to the partition: links leaving the partition are
        # invisible to the program, so they must not inflate a qubit's rank
        inside = part_adj[q]
        avg_cnot = (
            sum(g.link_error(q, v) for v in inside) / len(inside) if inside else 0.0
        )
        return len(inside) + (1.0 - (avg_cnot + g.readout_error[q]))

    ig = interaction_graph(p)
    occ_sum = {l: 0 for l in range(p.logical_qubits)}
    for idx, (a, b) in enumerate(p.two_qubit_ops):
        occ_sum[a] += idx
        occ_sum[b] += idx
    order = sorted(
        range(p.logical_qubits),
        key=lambda l: (-ig.weighted_degree(l), occ_sum[l], l),
    )
    by_cfm = sorted(phys, key=lambda q: (-view_cfm(q), q))

    weight = {}
    for (a, b), w in ig.edges.items():
        weight[(a, b)] = w
        weight[(b, a)] = w

    def attached_room(q: int, free: set[int]) -> int:
        """Largest free region still reachable from q once q is occupied."""
        rest = free - {q}
        best = 0
        seen: set[int] = set()
        for start in part_adj[q] & rest:
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                u = stack.pop()
                for v in part_adj[u] & rest:
                    if v not in comp:
                        comp.add(v)
                        stack.append(v)
            seen |= comp
            best = max(best, len(comp))
        return best

    placed: dict[int, int] = {}
    free = set(phys)
    for logical in order:
        partners = [
            (other, placed[other])
            for other in range(p.logical_qubits)
            if other in placed and weight.get((logical, other))
        ]
        unplaced_partners = sum(
            1
            for other in range(p.logical_qubits)
            if other not in placed and other != logical and weight.get((logical, other))
        )
        choice = None
        if partners:
            scored = []
            for q in sorted(free):
                touch = sum(
                    weight[(logical, other)]
                    for other, pq in partners
                    if pq in part_adj[q]
                )
                if touch:
                    # strongest partner contact first; then keep growth room
                    # open when more partners are coming, or take the most
                    # constrained spot when this qubit closes out its gates
                    room = attached_room(q, free)
                    room_key = -room if unplaced_partners else room
                    scored.append((-touch, room_key, -view_cfm(q), q))
            if scored:
                choice = min(scored)[3]
        if choice is None:
            choice = next(q for q in by_cfm if q in free)
        placed[logical] = choice
        free.discard(choice)
    return Mapping(tuple(sorted(placed.items())))


def _shortest_path(part_adj: dict[int, frozenset[int]], start: int, goal: int) -> list[int]:
    """BFS shortest path inside the partition, ties to smaller qubit index."""
    parent: dict[int, int | None] = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            path = [u]
            while parent[u] is not None:
                u = parent[u]
                path.append(u)
            return path[::-1]
        for v in sorted(part_adj[u]):
            if v not in parent:
                parent[v] = u
                queue.append(v)
    raise AssertionError(f"no path {start}->{goal} inside a supposedly connected partition")


def route_events(
    p: ProgramProfile, m: Mapping, partition: Partition, g: HardwareGraph
) -> Iterator[tuple]:
    """Routed physical gate stream: ('swap', a, b) and ('gate', a, b, op_index).

    Replaying the stream while tracking occupancy executes every program gate
    on adjacent physical qubits, in the original order.
    """
    part_set = frozenset(partition.qubits)
    part_adj = {q: g.adjacency[q] & part_set for q in part_set}
    log_to_phys = m.as_dict()
    if sorted(log_to_phys) != list(range(p.logical_qubits)) or set(
        log_to_phys.values()
    ) != part_set:
        raise ValidationError("mapping is not a bijection onto the partition")
    phys_to_log = {q: l for l, q in log_to_phys.items()}

    for idx, (la, lb) in enumerate(p.two_qubit_ops):
        pa, pb = log_to_phys[la], log_to_phys[lb]
        if pb not in part_adj[pa]:
            path = _shortest_path(part_adj, pa, pb)
            for step in path[1:-1]:
                yield ("swap", pa, step)
                moved, parked = phys_to_log[pa], phys_to_log[step]
                phys_to_log[pa], phys_to_log[step] = parked, moved
                log_to_phys[moved] = step
                log_to_phys[parked] = pa
                pa = step
        yield ("gate", pa, pb, idx)


def asap_depth(ops: Iterable[tuple[int, ...]]) -> int:
    """Greedy layering: each op occupies all its qubits for one layer."""
    busy_until: dict[int, int] = {}
    depth = 0
    for qubits in ops:
        layer = 1 + max((busy_until.get(q, 0) for q in qubits), default=0)
        for q in qubits:
            busy_until[q] = layer
        depth = max(depth, layer)
    return depth


def route(p: ProgramProfile, m: Mapping, partition: Partition, g: HardwareGraph) -> RoutingReport:
    """Insert SWAPs for non-adjacent gates and account the overhead."""
    swaps = 0
    physical_ops: list[tuple[int, ...]] = []
    for event in route_events(p, m, partition, g):
        if event[0] == "swap":
            swaps += 1
            physical_ops.append((event[1], event[2]))
        else:
            physical_ops.append((event[1], event[2]))
    cx_before = p.cx_count
    cx_after = cx_before + SWAP_CX_COST * swaps
    depth_before = asap_depth(p.two_qubit_ops)
    depth_after = asap_depth(physical_ops)
    return RoutingReport(
        swaps_inserted=swaps,
        cx_before=cx_before,
        cx_after=cx_after,
        depth_before=depth_before,
        depth_after=depth_after,
        delta_cx_ratio=(cx_after - cx_before) / cx_before if cx_before else 0.0,
        delta_depth_ratio=(depth_after - depth_before) / depth_before if depth_before else 0.0,
    )


def route_partition(partition: Partition, g: HardwareGraph) -> RoutingReport:
    """Convenience: map and route a partition's program in one call."""
    mapping = initial_mapping(partition.program, partition, g)
    return route(partition.program, mapping, partition, g)
