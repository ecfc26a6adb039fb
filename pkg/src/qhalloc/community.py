"""Louvain community detection over the coupling map and the hierarchy tree.

Link weights default to fidelity (1 - cnot_error) so that low-error regions
cluster together; the ``raw_error_weights`` switch keeps the literal
error-rate weighting for comparison runs.

Two gain quantities live here and they are not the same thing:

* ``move_gain`` is the resolution-scaled weighted-modularity difference of
  inserting an isolated node into a community.  It is an exact difference of
  the global ``modularity`` score, which is what makes the per-level
  monotonicity guarantee provable, and it is what the Louvain sweep uses to
  accept moves.
* ``modularity_gain`` is the published composite gain expression with its
  particular normalization.  It is kept as an exact implementation of that
  formula.  It is not the difference of any global partition score (it is
  asymmetric in the moving node), so it cannot drive the sweep without
  degenerating to all-singleton output on fidelity-weighted graphs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import metrics
from .topology import HardwareGraph, ValidationError, connected_components

MIN_WEIGHT = 1e-12
DEFAULT_GAMMA = 1.0
DEFAULT_MAX_LEAF_COMMUNITY = 4


class WeightedGraph:
    """Undirected weighted graph over qubit ids; all weights positive."""

    def __init__(self, nodes: Iterable[int], edges: Mapping[tuple[int, int], float]):
        self.nodes: tuple[int, ...] = tuple(sorted(nodes))
        node_set = set(self.nodes)
        self.adjacency: dict[int, dict[int, float]] = {u: {} for u in self.nodes}
        self.edges: dict[tuple[int, int], float] = {}
        for (a, b), w in sorted(edges.items()):
            if a == b or a not in node_set or b not in node_set:
                raise ValidationError(f"bad edge ({a}, {b})")
            if w <= 0:
                raise ValidationError(f"non-positive weight {w} on edge ({a}, {b})")
            key = (a, b) if a < b else (b, a)
            if key in self.edges:
                raise ValidationError(f"duplicate edge {key}")
            self.edges[key] = w
            self.adjacency[a][b] = w
            self.adjacency[b][a] = w
        self.total_weight: float = sum(self.edges.values())
        self.degree: dict[int, float] = {
            u: sum(self.adjacency[u].values()) for u in self.nodes
        }

    def induced(self, qubits: Iterable[int]) -> "WeightedGraph":
        qset = set(qubits)
        edges = {e: w for e, w in self.edges.items() if e[0] in qset and e[1] in qset}
        return WeightedGraph(qset, edges)


def weighted_view(g: HardwareGraph, raw_error_weights: bool = False) -> WeightedGraph:
    """Coupling map as a weighted graph; weight is link fidelity by default."""
    edges = {}
    for link, err in g.cnot_error.items():
        w = err if raw_error_weights else 1.0 - err
        edges[link] = max(w, MIN_WEIGHT)
    return WeightedGraph(range(g.qubit_count), edges)


@dataclass(frozen=True)
class CommunityPartition:
    """Node-to-community assignment at one Louvain level."""

    assignment: dict[int, int]
    level: int

    def communities(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {}
        for node, label in self.assignment.items():
            out.setdefault(label, set()).add(node)
        return {label: frozenset(nodes) for label, nodes in out.items()}


def modularity(g: WeightedGraph, communities: Iterable[Iterable[int]], gamma: float = DEFAULT_GAMMA) -> float:
    """Standard resolution-scaled weighted modularity of a partition."""
    m = g.total_weight
    if m <= 0:
        raise ValidationError("modularity undefined on an edgeless graph")
    score = 0.0
    for comm in communities:
        cset = set(comm)
        intra = sum(w for (a, b), w in g.edges.items() if a in cset and b in cset)
        tot = sum(g.degree[u] for u in cset)
        score += intra / m - gamma * (tot / (2.0 * m)) ** 2
    return score


def move_gain(k_uc: float, k_u: float, sigma_tot: float, m: float, gamma: float) -> float:
    """Modularity difference of inserting an isolated node into a community.

    ``k_uc``: weight between the node and the community, ``k_u``: the node's
    weighted degree, ``sigma_tot``: summed weighted degree of the community.
    Exactly Q(after) - Q(before) for the ``modularity`` score above.
    """
    return k_uc / m - gamma * sigma_tot * k_u / (2.0 * m * m)


def modularity_gain(
    g: WeightedGraph,
    node: int,
    community: int,
    state: CommunityPartition,
    gamma: float = DEFAULT_GAMMA,
) -> float:
    """Composite gain of moving an isolated node into ``community``.

    Computed as (sum_in - sum_tot*k_i) / 2m + gamma * k_i*k_in / 2m^2 where
    sum_in and k_in are the weights between the node and the community,
    k_i the node's weighted degree and sum_tot the community's total
    incident weight.
    """
    m = g.total_weight
    if m <= 0:
        raise ValidationError("modularity gain undefined on an edgeless graph")
    if state.assignment.get(node) == community:
        raise ValidationError(f"node {node} already belongs to community {community}")
    members = [u for u, label in state.assignment.items() if label == community]
    sigma_in = sum(g.adjacency[node].get(u, 0.0) for u in members)
    k_in = sigma_in
    k_i = g.degree[node]
    sigma_tot = sum(g.degree[u] for u in members)
    return (sigma_in - sigma_tot * k_i) / (2.0 * m) + gamma * (k_i * k_in) / (2.0 * m * m)


def _one_level(
    adjacency: dict[int, dict[int, float]],
    degree: dict[int, float],
    m: float,
    gamma: float,
    order: Sequence[int],
) -> tuple[bool, dict[int, int]]:
    """One Louvain local-move phase; returns (any_move, community-of-node)."""
    comm_of = {u: u for u in adjacency}
    sigma_tot = {u: degree[u] for u in adjacency}
    moved_any = False
    while True:
        moved = False
        for u in order:
            cur = comm_of[u]
            k_u = degree[u]
            sigma_tot[cur] -= k_u
            weights: dict[int, float] = {}
            for v, w in adjacency[u].items():
                weights[comm_of[v]] = weights.get(comm_of[v], 0.0) + w
            best_comm, best_gain = cur, move_gain(weights.get(cur, 0.0), k_u, sigma_tot[cur], m, gamma)
            for c in sorted(weights):
                if c == cur:
                    continue
                gain = move_gain(weights[c], k_u, sigma_tot[c], m, gamma)
                if gain > best_gain + 1e-12:
                    best_comm, best_gain = c, gain
            comm_of[u] = best_comm
            sigma_tot[best_comm] += k_u
            if best_comm != cur:
                moved = True
                moved_any = True
        if not moved:
            return moved_any, comm_of


def louvain(g: WeightedGraph, gamma: float = DEFAULT_GAMMA, seed: int = 0) -> list[CommunityPartition]:
    """Multi-level Louvain; one partition per level, coarsest last.

    Deterministic for a fixed seed: nodes are visited in ascending index
    order, shuffled once per level only when the seed is nonzero.  Every
    returned community induces a connected subgraph of the coupling map
    (disconnected modularity communities are split into components).
    """
    if g.total_weight <= 0:
        raise ValidationError("louvain needs at least one edge")
    plain_adjacency = {u: frozenset(g.adjacency[u]) for u in g.nodes}
    if len(connected_components(g.nodes, plain_adjacency)) != 1:
        raise ValidationError("louvain expects a connected graph")

    rng = random.Random(seed) if seed != 0 else None
    adjacency = {u: dict(g.adjacency[u]) for u in g.nodes}
    self_loop = {u: 0.0 for u in g.nodes}
    degree = dict(g.degree)
    members: dict[int, frozenset[int]] = {u: frozenset([u]) for u in g.nodes}
    m = g.total_weight

    levels: list[CommunityPartition] = []
    while True:
        order = sorted(adjacency)
        if rng is not None:
            rng.shuffle(order)
        moved, comm_of = _one_level(adjacency, degree, m, gamma, order)
        if not moved:
            break

        groups: dict[int, set[int]] = {}
        for u, c in comm_of.items():
            groups.setdefault(c, set()).add(u)
        # Split communities that are disconnected on the (super)node graph;
        # each supernode is itself connected, so component-connectivity here
        # implies connectivity of the underlying qubit set.
        super_adjacency = {u: frozenset(adjacency[u]) for u in adjacency}
        repaired: list[frozenset[int]] = []
        for group in groups.values():
            repaired.extend(connected_components(group, super_adjacency))
        repaired.sort(key=lambda comp: min(min(members[u]) for u in comp))

        assignment: dict[int, int] = {}
        for label, comp in enumerate(repaired):
            for u in comp:
                for q in members[u]:
                    assignment[q] = label
        levels.append(CommunityPartition(assignment=assignment, level=len(levels)))

        if len(repaired) >= len(adjacency):
            break

        new_members = {
            label: frozenset().union(*(members[u] for u in comp))
            for label, comp in enumerate(repaired)
        }
        label_of = {u: label for label, comp in enumerate(repaired) for u in comp}
        new_adjacency: dict[int, dict[int, float]] = {label: {} for label in new_members}
        new_self = {label: 0.0 for label in new_members}
        for u in adjacency:
            cu = label_of[u]
            new_self[cu] += self_loop[u]
            for v, w in adjacency[u].items():
                if u < v:
                    cv = label_of[v]
                    if cu == cv:
                        new_self[cu] += w
                    else:
                        new_adjacency[cu][cv] = new_adjacency[cu].get(cv, 0.0) + w
                        new_adjacency[cv][cu] = new_adjacency[cv].get(cu, 0.0) + w
        adjacency = new_adjacency
        self_loop = new_self
        degree = {
            label: sum(new_adjacency[label].values()) + 2.0 * new_self[label]
            for label in new_members
        }
        members = new_members
        if len(adjacency) == 1:
            break

    if not levels:
        levels = [CommunityPartition(assignment={q: i for i, q in enumerate(g.nodes)}, level=0)]
    return levels


@dataclass(frozen=True)
class TreeNode:
    """One community in the hierarchy tree; immutable."""

    qubits: tuple[int, ...]
    cri: float
    level: int
    children: tuple["TreeNode", ...]
    qubit_set: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "qubit_set", frozenset(self.qubits))

    @property
    def size(self) -> int:
        return len(self.qubits)

    def is_leaf(self) -> bool:
        return not self.children


class HierarchyTree:
    """Dendrogram of nested, connected qubit communities for one calibration.

    Built once per calibration cycle and immutable afterwards; which nodes
    are consumed during allocation is tracked by the callers, never here.
    """

    def __init__(self, root: TreeNode, calibration_id: str, gamma: float, seed: int, max_leaf_community: int, alpha: float):
        self.root = root
        self.calibration_id = calibration_id
        self.gamma = gamma
        self.seed = seed
        self.max_leaf_community = max_leaf_community
        self.alpha = alpha
        flat: list[TreeNode] = []
        stack = [root]
        while stack:
            node = stack.pop()
            flat.append(node)
            stack.extend(reversed(node.children))
        self.nodes: tuple[TreeNode, ...] = tuple(flat)

    def __iter__(self):
        return iter(self.nodes)


def build_hierarchy(
    g: HardwareGraph,
    gamma: float = DEFAULT_GAMMA,
    seed: int = 0,
    max_leaf_community: int = DEFAULT_MAX_LEAF_COMMUNITY,
    alpha: float = metrics.DEFAULT_ALPHA,
    raw_error_weights: bool = False,
) -> HierarchyTree:
    """Recursively split the device into communities until leaves are single qubits.

    Communities larger than ``max_leaf_community`` are re-clustered with
    Louvain; a community that no longer splits (or is already small) gets its
    qubits attached as leaf children directly.  Every node carries its CRI.
    """
    if g.qubit_count < 2:
        raise ValidationError("hierarchy needs a device with at least 2 qubits")
    wg = weighted_view(g, raw_error_weights=raw_error_weights)

    def node_cri(qubits: frozenset[int]) -> float:
        if len(qubits) == 1:
            return metrics.cri_single(next(iter(qubits)), g, alpha)
        return metrics.cri_of_set(g, qubits, alpha)

    def build(qubits: frozenset[int], level: int) -> TreeNode:
        if len(qubits) == 1:
            return TreeNode(tuple(qubits), node_cri(qubits), level, ())
        parts: list[frozenset[int]] = []
        if len(qubits) > max_leaf_community:
            sub = wg.induced(qubits)
            final = louvain(sub, gamma=gamma, seed=seed)[-1]
            comms = sorted(final.communities().values(), key=min)
            if len(comms) > 1:
                parts = comms
        if not parts:
            parts = [frozenset([q]) for q in sorted(qubits)]
        children = tuple(build(part, level + 1) for part in parts)
        return TreeNode(tuple(sorted(qubits)), node_cri(qubits), level, children)

    root = build(frozenset(g.qubits), 0)
    return HierarchyTree(root, g.calibration_id, gamma, seed, max_leaf_community, alpha)


def find_candidates(tree: HierarchyTree, size: int, consumed: frozenset[int] | set[int]) -> list[TreeNode]:
    """Tree nodes disjoint from ``consumed`` that can host ``size`` qubits.

    Exact-size nodes rank first; then by descending CRI, ascending size,
    smallest minimum qubit index.
    """
    if size < 1:
        raise ValidationError("candidate size must be >= 1")
    consumed = frozenset(consumed)
    out = [
        node
        for node in tree.nodes
        if node.size >= size and not (node.qubit_set & consumed)
    ]
    out.sort(key=lambda n: (0 if n.size == size else 1, -n.cri, n.size, n.qubits[0]))
    return out


def _node_to_dict(node: TreeNode) -> dict:
    return {
        "qubits": list(node.qubits),
        "cri": node.cri,
        "children": [_node_to_dict(child) for child in node.children],
    }


def tree_to_json(tree: HierarchyTree) -> str:
    """Canonical JSON rendering; byte-identical for identical builds."""
    return json.dumps(_node_to_dict(tree.root), indent=2, sort_keys=True) + "\n"


def _node_from_dict(payload: dict, level: int) -> TreeNode:
    children = tuple(_node_from_dict(c, level + 1) for c in payload["children"])
    return TreeNode(tuple(payload["qubits"]), float(payload["cri"]), level, children)


def tree_from_json(
    text: str,
    calibration_id: str = "unknown",
    gamma: float = DEFAULT_GAMMA,
    seed: int = 0,
    max_leaf_community: int = DEFAULT_MAX_LEAF_COMMUNITY,
    alpha: float = metrics.DEFAULT_ALPHA,
) -> HierarchyTree:
    root = _node_from_dict(json.loads(text), 0)
    return HierarchyTree(root, calibration_id, gamma, seed, max_leaf_community, alpha)
