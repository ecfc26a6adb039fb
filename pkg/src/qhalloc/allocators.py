"""Partitioning heuristics that map a queue of programs onto hardware.

All allocators consume the queue in the order given (scheduling policy is
the caller's job), never reorder it, and record infeasible programs instead
of raising.  Each is a pure function of its inputs, so identical calls give
identical plans.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from . import metrics
from .circuits import ProgramProfile
from .community import HierarchyTree, TreeNode, find_candidates
from .topology import HardwareGraph, ValidationError, hop_distances

DEFAULT_ENUM_CAP = 200_000
DENSEST_EXHAUSTIVE_LIMIT = 12

METHOD_ATTRACTOR = "attractor"
METHOD_CRI_GREEDY = "cri_greedy"
METHOD_COMDAP = "comdap"
METHOD_SECURE_GENERAL = "comdap_secure_general"
METHOD_SECURE_SMART = "comdap_secure_smart"

# Returns the extra qubits to fence off after a partition is placed.
Padder = Callable[[frozenset[int], frozenset[int]], frozenset[int]]


@dataclass(frozen=True)
class Partition:
    """One allocated, connected qubit set and the program it hosts."""

    qubits: tuple[int, ...]
    cri: float
    program: ProgramProfile
    method: str

    def qubit_set(self) -> frozenset[int]:
        return frozenset(self.qubits)


@dataclass(frozen=True)
class AllocationPlan:
    partitions: tuple[Partition, ...]
    padded_qubits: frozenset[int]
    unallocated: tuple[ProgramProfile, ...]
    utilization: float

    def allocated_qubits(self) -> frozenset[int]:
        out: set[int] = set()
        for p in self.partitions:
            out.update(p.qubits)
        return frozenset(out)


def _finish(
    g: HardwareGraph,
    partitions: list[Partition],
    padded: set[int],
    unallocated: list[ProgramProfile],
) -> AllocationPlan:
    used: set[int] = set()
    for p in partitions:
        used.update(p.qubits)
    return AllocationPlan(
        partitions=tuple(partitions),
        padded_qubits=frozenset(padded),
        unallocated=tuple(unallocated),
        utilization=len(used) / g.qubit_count,
    )


def enumerate_connected_sets(
    adjacency: dict[int, frozenset[int]],
    allowed: frozenset[int],
    k: int,
) -> Iterator[frozenset[int]]:
    """All connected induced size-k subsets of ``allowed``, each exactly once.

    Anchored enumeration: every set is produced from its minimum vertex, and
    extensions track the exclusive neighborhood so no set repeats.
    """
    if k < 1:
        return
    if k == 1:
        for v in sorted(allowed):
            yield frozenset([v])
        return

    def extend(sub: set[int], ext: set[int], hood: set[int], anchor: int) -> Iterator[frozenset[int]]:
        if len(sub) == k:
            yield frozenset(sub)
            return
        ext = set(ext)
        while ext:
            w = min(ext)
            ext.remove(w)
            fresh = {
                u
                for u in adjacency[w]
                if u in allowed and u > anchor and u not in hood
            }
            sub.add(w)
            yield from extend(sub, ext | fresh, hood | fresh | {w}, anchor)
            sub.remove(w)

    for v in sorted(allowed):
        ext0 = {u for u in adjacency[v] if u in allowed and u > v}
        yield from extend({v}, ext0, ext0 | {v}, v)


def sample_connected_sets(
    adjacency: dict[int, frozenset[int]],
    allowed: frozenset[int],
    k: int,
    count: int,
    seed: int,
) -> list[frozenset[int]]:
    """Seeded random growth of up to ``count`` distinct connected k-subsets."""
    rng = random.Random(seed)
    pool = sorted(allowed)
    seen: set[frozenset[int]] = set()
    out: list[frozenset[int]] = []
    attempts = 0
    max_attempts = max(count * 20, 1000)
    while len(out) < count and attempts < max_attempts:
        attempts += 1
        cur = {rng.choice(pool)}
        while len(cur) < k:
            frontier = sorted(
                {u for q in cur for u in adjacency[q] if u in allowed} - cur
            )
            if not frontier:
                break
            cur.add(rng.choice(frontier))
        if len(cur) == k:
            fs = frozenset(cur)
            if fs not in seen:
                seen.add(fs)
                out.append(fs)
    return out


def _grow_from_attractor(
    g: HardwareGraph, attractor: int, free: frozenset[int], k: int
) -> frozenset[int] | None:
    """BFS-style growth: repeatedly absorb the free neighbor with highest CFM."""
    grown = {attractor}
    while len(grown) < k:
        frontier = {u for q in grown for u in g.adjacency[q] if u in free} - grown
        if not frontier:
            return None
        best = max(sorted(frontier), key=lambda q: (metrics.cfm(g, q), -q))
        grown.add(best)
    return frozenset(grown)


def allocate_attractor(queue: Sequence[ProgramProfile], g: HardwareGraph, alpha: float = metrics.DEFAULT_ALPHA) -> AllocationPlan:
    """Greedy baseline: per program, try every free qubit as an attractor,
    grow to size by best-CFM neighbors, keep the candidate with the largest
    summed CFM."""
    free = set(g.qubits)
    partitions: list[Partition] = []
    unallocated: list[ProgramProfile] = []
    for program in queue:
        k = program.logical_qubits
        best_set: frozenset[int] | None = None
        best_score = float("-inf")
        best_key: tuple[int, ...] = ()
        frozen_free = frozenset(free)
        for attractor in sorted(free):
            candidate = _grow_from_attractor(g, attractor, frozen_free, k)
            if candidate is None:
                continue
            score = sum(metrics.cfm(g, q) for q in candidate)
            key = tuple(sorted(candidate))
            if score > best_score + 1e-12 or (
                abs(score - best_score) <= 1e-12 and key < best_key
            ):
                best_set, best_score, best_key = candidate, score, key
        if best_set is None:
            unallocated.append(program)
            continue
        partitions.append(
            Partition(tuple(sorted(best_set)), metrics.cri_of_set(g, best_set, alpha), program, METHOD_ATTRACTOR)
        )
        free -= best_set
    return _finish(g, partitions, set(), unallocated)


def allocate_cri_greedy(
    queue: Sequence[ProgramProfile],
    g: HardwareGraph,
    enum_cap: int = DEFAULT_ENUM_CAP,
    seed: int = 0,
    alpha: float = metrics.DEFAULT_ALPHA,
) -> AllocationPlan:
    """Exhaustive greedy: per program, enumerate connected free subsets of the
    exact size and take the one with the highest CRI.

    When more than ``enum_cap`` candidates exist, falls back to seeded random
    sampling of ``enum_cap`` candidates.
    """
    if enum_cap < 1:
        raise ValidationError("enum_cap must be >= 1")
    free = set(g.qubits)
    partitions: list[Partition] = []
    unallocated: list[ProgramProfile] = []
    for index, program in enumerate(queue):
        k = program.logical_qubits
        frozen_free = frozenset(free)
        candidates: list[frozenset[int]] = []
        overflow = False
        for candidate in enumerate_connected_sets(g.adjacency, frozen_free, k):
            candidates.append(candidate)
            if len(candidates) > enum_cap:
                overflow = True
                break
        if overflow:
            candidates = sample_connected_sets(
                g.adjacency, frozen_free, k, enum_cap, seed=seed * 1_000_003 + index
            )
        best_set: frozenset[int] | None = None
        best_cri = float("-inf")
        best_key: tuple[int, ...] = ()
        for candidate in candidates:
            value = metrics.cri_of_set(g, candidate, alpha)
            key = tuple(sorted(candidate))
            if value > best_cri + 1e-12 or (
                abs(value - best_cri) <= 1e-12 and key < best_key
            ):
                best_set, best_cri, best_key = candidate, value, key
        if best_set is None:
            unallocated.append(program)
            continue
        partitions.append(Partition(best_key, best_cri, program, METHOD_CRI_GREEDY))
        free -= best_set
    return _finish(g, partitions, set(), unallocated)


def densest_subset(community: frozenset[int], size: int, g: HardwareGraph, alpha: float = metrics.DEFAULT_ALPHA) -> frozenset[int]:
    """Best connected size-``size`` subset of a community.

    Small communities are searched exhaustively for the max-CRI subset;
    large ones are peeled greedily, dropping the node whose removal keeps the
    subgraph connected with the best remaining fidelity-weighted density.
    """
    if not 1 <= size <= len(community):
        raise ValidationError(f"cannot pick {size} qubits from a community of {len(community)}")
    if size == len(community):
        return community
    if size == 1:
        return frozenset([
            max(sorted(community), key=lambda q: (metrics.cri_single(q, g, alpha), -q))
        ])

    if len(community) <= DENSEST_EXHAUSTIVE_LIMIT:
        best: frozenset[int] | None = None
        best_cri = float("-inf")
        best_key: tuple[int, ...] = ()
        for candidate in enumerate_connected_sets(g.adjacency, community, size):
            value = metrics.cri_of_set(g, candidate, alpha)
            key = tuple(sorted(candidate))
            if value > best_cri + 1e-12 or (
                abs(value - best_cri) <= 1e-12 and key < best_key
            ):
                best, best_cri, best_key = candidate, value, key
        if best is None:
            raise ValidationError(f"no connected subset of size {size} in {sorted(community)}")
        return best

    def weighted_density(qubits: set[int]) -> float:
        n = len(qubits)
        total = 0.0
        for q in qubits:
            for v in g.adjacency[q] & qubits:
                if v > q:
                    total += 1.0 - g.cnot_error[(q, v)]
        return 2.0 * total / (n * (n - 1))

    current = set(community)
    while len(current) > size:
        best_q: int | None = None
        best_density = float("-inf")
        for q in sorted(current, reverse=True):
            rest = current - {q}
            seed_node = min(rest)
            if len(hop_distances(g.adjacency, seed_node, frozenset(rest))) != len(rest):
                continue
            d = weighted_density(rest)
            if d > best_density + 1e-12:
                best_q, best_density = q, d
        if best_q is None:
            raise ValidationError("greedy peel could not keep the subset connected")
        current.remove(best_q)
    return frozenset(current)


def _set_distance(
    g: HardwareGraph, sources: frozenset[int], usable: frozenset[int], targets: frozenset[int]
) -> tuple[int | None, list[int]]:
    """Min hop distance from ``sources`` to ``targets`` through ``usable``
    qubits, plus the interior qubits of one deterministic shortest path."""
    from collections import deque

    parent: dict[int, int | None] = {q: None for q in sources}
    queue = deque(sorted(sources))
    while queue:
        u = queue.popleft()
        if u in targets:
            interior = []
            node = parent[u]
            while node is not None and node not in sources:
                interior.append(node)
                node = parent[node]
            depth = len(interior) + (1 if u not in sources else 0)
            return depth, interior
        for v in sorted(g.adjacency[u]):
            if v not in parent and (v in usable or v in targets):
                parent[v] = u
                queue.append(v)
    return None, []


def _merge_partition(
    tree: HierarchyTree,
    g: HardwareGraph,
    k: int,
    consumed: frozenset[int],
    alpha: float,
) -> frozenset[int] | None:
    """Scenario (c): glue the closest-size base community to its nearest
    smaller neighbors (connecting through free qubits) until the target size
    is reached, then trim with densest_subset if overshooting."""
    available = [
        node
        for node in tree.nodes
        if node is not tree.root and not (node.qubit_set & consumed)
    ]
    if not available:
        return None
    base = min(available, key=lambda n: (abs(n.size - k), -n.cri, n.qubits[0]))
    merged = set(base.qubit_set)
    while len(merged) < k:
        frozen_merged = frozenset(merged)
        free = frozenset(set(g.qubits) - consumed - merged)
        options = []
        for node in available:
            if node.qubit_set & merged:
                continue
            dist, interior = _set_distance(g, frozen_merged, free, node.qubit_set)
            if dist is None:
                continue
            options.append((node, dist, interior))
        if not options:
            return None
        smaller = [opt for opt in options if opt[0].size <= len(merged)]
        pool = smaller if smaller else options
        node, _, interior = min(
            pool, key=lambda opt: (opt[1], -opt[0].cri, opt[0].qubits[0])
        )
        merged.update(node.qubit_set)
        merged.update(interior)
    result = frozenset(merged)
    if len(result) > k:
        result = densest_subset(result, k, g, alpha)
    return result


def allocate_comdap(
    queue: Sequence[ProgramProfile],
    tree: HierarchyTree,
    g: HardwareGraph,
    alpha: float | None = None,
    padder: Padder | None = None,
    method: str = METHOD_COMDAP,
) -> AllocationPlan:
    """Community-driven allocation over the hierarchy tree.

    Per program: take the best exact-size community; else carve the densest
    subset out of the best larger community; else merge nearby smaller
    communities until the size fits.  A ``padder`` (crosstalk isolation)
    runs after every placement so later programs see the shrunken free set.
    """
    if alpha is None:
        alpha = tree.alpha
    allocated: set[int] = set()
    padded: set[int] = set()
    partitions: list[Partition] = []
    unallocated: list[ProgramProfile] = []
    for program in queue:
        k = program.logical_qubits
        consumed = frozenset(allocated | padded)
        chosen: frozenset[int] | None = None
        candidates = [
            node for node in find_candidates(tree, k, consumed) if node is not tree.root
        ]
        exact = [node for node in candidates if node.size == k]
        if exact:
            chosen = exact[0].qubit_set
        else:
            larger = [node for node in candidates if node.size > k]
            if larger:
                chosen = densest_subset(larger[0].qubit_set, k, g, alpha)
            else:
                chosen = _merge_partition(tree, g, k, consumed, alpha)
        if chosen is None:
            unallocated.append(program)
            continue
        partitions.append(
            Partition(tuple(sorted(chosen)), metrics.cri_of_set(g, chosen, alpha), program, method)
        )
        allocated.update(chosen)
        if padder is not None:
            padded.update(padder(chosen, frozenset(allocated | padded)))
    return _finish(g, partitions, padded, unallocated)
