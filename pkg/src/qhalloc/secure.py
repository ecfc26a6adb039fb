"""Crosstalk-aware extensions: significance tests and padding heuristics.

A crosstalk model lists pairs of coupling links one hop apart whose
concurrent operation inflates error rates.  Padding fences off buffer qubits
while the allocation loop runs, so isolation shrinks the free set seen by
later programs instead of being patched on afterwards.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from . import allocators
from .allocators import AllocationPlan, Padder
from .circuits import ProgramProfile
from .community import HierarchyTree
from .topology import HardwareGraph, Link, ValidationError, canonical_link

DEFAULT_THRESHOLD_FACTOR = 3.0


@dataclass(frozen=True)
class CrosstalkEntry:
    pair_i: Link
    pair_j: Link
    baseline_i: float
    correlated_i: float


@dataclass(frozen=True)
class CrosstalkModel:
    entries: tuple[CrosstalkEntry, ...]
    threshold_factor: float = DEFAULT_THRESHOLD_FACTOR

    def significant_entries(self) -> tuple[CrosstalkEntry, ...]:
        return tuple(e for e in self.entries if is_significant(e, self.threshold_factor))


def is_significant(entry: CrosstalkEntry, factor: float = DEFAULT_THRESHOLD_FACTOR) -> bool:
    """Crosstalk counts when the correlated rate strictly exceeds factor x baseline."""
    return entry.correlated_i > factor * entry.baseline_i


def links_one_hop_apart(g: HardwareGraph, link_a: Link, link_b: Link) -> bool:
    """Disjoint links with at least one coupling edge between their endpoints."""
    a = set(link_a)
    b = set(link_b)
    if a & b:
        return False
    return any(v in g.adjacency[u] for u in a for v in b)


def one_hop_link_pairs(g: HardwareGraph) -> list[tuple[Link, Link]]:
    """All unordered one-hop link couples of the device, in canonical order."""
    out = []
    for i, la in enumerate(g.links):
        for lb in g.links[i + 1 :]:
            if links_one_hop_apart(g, la, lb):
                out.append((la, lb))
    return out


def validate_model(model: CrosstalkModel, g: HardwareGraph) -> None:
    for entry in model.entries:
        for pair in (entry.pair_i, entry.pair_j):
            if canonical_link(*pair) not in g.cnot_error:
                raise ValidationError(f"crosstalk pair {pair} is not a device link")
        if not links_one_hop_apart(g, entry.pair_i, entry.pair_j):
            raise ValidationError(
                f"crosstalk pairs {entry.pair_i} / {entry.pair_j} are not one hop apart"
            )
        for rate in (entry.baseline_i, entry.correlated_i):
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"crosstalk rate {rate} outside [0,1]")


def generate_crosstalk_configs(
    g: HardwareGraph, k: int, count: int, seed: int
) -> list[CrosstalkModel]:
    """``count`` seeded models, each marking k one-hop link couples significant."""
    pairs = one_hop_link_pairs(g)
    if k > len(pairs):
        raise ValidationError(
            f"asked for {k} crosstalk-prone couples but the device has only {len(pairs)}"
        )
    rng = random.Random(seed)
    models = []
    for _ in range(count):
        entries = []
        for pair_i, pair_j in sorted(rng.sample(pairs, k)):
            baseline = g.cnot_error[canonical_link(*pair_i)]
            if baseline > 0:
                correlated = min(1.0, baseline * rng.uniform(3.5, 8.0))
            else:
                correlated = 0.01 * (1.0 + rng.random())
            entries.append(CrosstalkEntry(pair_i, pair_j, baseline, correlated))
        models.append(CrosstalkModel(tuple(entries)))
    return models


def neighbor_padding(
    qubits: frozenset[int], g: HardwareGraph, unavailable: frozenset[int] = frozenset()
) -> frozenset[int]:
    """One-hop neighborhood of a partition, minus anything already taken."""
    pads = {v for q in qubits for v in g.adjacency[q]}
    return frozenset(pads - qubits - unavailable)


def smart_pads(
    partition: frozenset[int],
    model: CrosstalkModel,
    g: HardwareGraph,
    unavailable: frozenset[int] = frozenset(),
) -> frozenset[int]:
    """Buffer qubits required by significant entries touching this partition.

    When the partition holds one pair of a significant couple and the foreign
    pair is fully outside, every foreign-pair qubit adjacent to the held pair
    is padded.  Couples fully inside one partition need no padding.
    """
    pads: set[int] = set()
    for entry in model.significant_entries():
        pi = frozenset(entry.pair_i)
        pj = frozenset(entry.pair_j)
        for inside, outside in ((pi, pj), (pj, pi)):
            if inside <= partition and not (outside & partition):
                for q in outside:
                    if q in unavailable:
                        continue
                    if g.adjacency[q] & inside:
                        pads.add(q)
    return frozenset(pads)


def general_padding(plan: AllocationPlan, g: HardwareGraph) -> AllocationPlan:
    """Plan with every qubit adjacent to a partition marked as padded."""
    pads: set[int] = set()
    allocated = plan.allocated_qubits()
    for partition in plan.partitions:
        pads |= neighbor_padding(partition.qubit_set(), g, allocated)
    return AllocationPlan(plan.partitions, frozenset(pads), plan.unallocated, plan.utilization)


def smart_padding(plan: AllocationPlan, model: CrosstalkModel, g: HardwareGraph) -> frozenset[int]:
    """Padding set implied by the partitions placed so far."""
    pads: set[int] = set()
    allocated = plan.allocated_qubits()
    for partition in plan.partitions:
        pads |= smart_pads(partition.qubit_set(), model, g, allocated)
    return frozenset(pads | plan.padded_qubits)


def general_padder(g: HardwareGraph) -> Padder:
    def pad(partition: frozenset[int], consumed: frozenset[int]) -> frozenset[int]:
        return neighbor_padding(partition, g, consumed)

    return pad


def smart_padder(g: HardwareGraph, model: CrosstalkModel) -> Padder:
    def pad(partition: frozenset[int], consumed: frozenset[int]) -> frozenset[int]:
        return smart_pads(partition, model, g, consumed)

    return pad


def allocate_comdap_secure_general(
    queue: list[ProgramProfile] | tuple[ProgramProfile, ...],
    tree: HierarchyTree,
    g: HardwareGraph,
    alpha: float | None = None,
) -> AllocationPlan:
    """COMDAP with full buffer rings around every placed partition."""
    return allocators.allocate_comdap(
        queue, tree, g, alpha=alpha, padder=general_padder(g),
        method=allocators.METHOD_SECURE_GENERAL,
    )


def allocate_comdap_secure_smart(
    queue: list[ProgramProfile] | tuple[ProgramProfile, ...],
    tree: HierarchyTree,
    g: HardwareGraph,
    model: CrosstalkModel,
    alpha: float | None = None,
) -> AllocationPlan:
    """COMDAP padding only the qubits that significant crosstalk couples need."""
    return allocators.allocate_comdap(
        queue, tree, g, alpha=alpha, padder=smart_padder(g, model),
        method=allocators.METHOD_SECURE_SMART,
    )


def security_violations(
    plan: AllocationPlan, model: CrosstalkModel
) -> list[tuple[CrosstalkEntry, tuple[int, ...], tuple[int, ...]]]:
    """Concurrent partitions activating both halves of a significant couple."""
    out = []
    for entry in model.significant_entries():
        pi = frozenset(entry.pair_i)
        pj = frozenset(entry.pair_j)
        for a in plan.partitions:
            for b in plan.partitions:
                if a is b:
                    continue
                if pi <= a.qubit_set() and pj <= b.qubit_set():
                    out.append((entry, a.qubits, b.qubits))
    return out


def model_to_dict(model: CrosstalkModel) -> dict:
    return {
        "threshold_factor": model.threshold_factor,
        "entries": [
            {
                "pair_i": list(e.pair_i),
                "pair_j": list(e.pair_j),
                "baseline_i": e.baseline_i,
                "correlated_i": e.correlated_i,
            }
            for e in model.entries
        ],
    }


def model_from_dict(payload: dict) -> CrosstalkModel:
    try:
        entries = tuple(
            CrosstalkEntry(
                pair_i=(int(e["pair_i"][0]), int(e["pair_i"][1])),
                pair_j=(int(e["pair_j"][0]), int(e["pair_j"][1])),
                baseline_i=float(e["baseline_i"]),
                correlated_i=float(e["correlated_i"]),
            )
            for e in payload["entries"]
        )
        factor = float(payload.get("threshold_factor", DEFAULT_THRESHOLD_FACTOR))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ValidationError(f"malformed crosstalk config: {exc}") from exc
    return CrosstalkModel(entries, factor)


def load_crosstalk(path: str) -> CrosstalkModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if isinstance(payload, list):
        if not payload:
            raise ValidationError(f"{path}: empty crosstalk config list")
        payload = payload[0]
    return model_from_dict(payload)


def save_crosstalk(models: list[CrosstalkModel], path: str) -> None:
    payload = [model_to_dict(m) for m in models]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload[0] if len(payload) == 1 else payload, fh, indent=2)
        fh.write("\n")
