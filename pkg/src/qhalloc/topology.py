"""Hardware device model: coupling map plus calibration error rates.

A device is an undirected, connected graph of qubits.  Every link carries a
two-qubit (CNOT) error rate and every qubit a readout error rate.  Graphs are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

Link = tuple[int, int]


class ValidationError(ValueError):
    """Input violates a device-model invariant (range, connectivity, duplicates)."""


class SnapshotError(ValueError):
    """Calibration snapshot file is structurally malformed."""


# 27-qubit heavy-hex lattice (IBM Falcon layout, qubits 0-26).  Shipped as a
# fixed adjacency template so the coupling pattern is bit-exact across runs.
HEAVY_HEX_27_LINKS: tuple[Link, ...] = (
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7),
    (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15),
    (13, 14), (14, 16), (15, 18), (16, 19), (17, 18), (18, 21), (19, 20),
    (19, 22), (21, 23), (22, 25), (23, 24), (24, 25), (25, 26),
)

TOPOLOGY_KINDS = ("line", "grid", "heavy-hex-27", "ring")


def canonical_link(a: int, b: int) -> Link:
    if a == b:
        raise ValidationError(f"self-loop on qubit {a}")
    return (a, b) if a < b else (b, a)


class HardwareGraph:
    """Validated, immutable coupling map with per-link and per-qubit error rates."""

    def __init__(
        self,
        qubit_count: int,
        links: Iterable[Link],
        cnot_error: Mapping[Link, float],
        readout_error: Mapping[int, float],
        calibration_id: str = "unnamed",
    ):
        if qubit_count < 1:
            raise ValidationError("device needs at least one qubit")
        canon: list[Link] = []
        seen: set[Link] = set()
        for a, b in links:
            link = canonical_link(a, b)
            if link in seen:
                raise ValidationError(f"duplicate link {link}")
            seen.add(link)
            canon.append(link)
        self.qubit_count = qubit_count
        self.links: tuple[Link, ...] = tuple(sorted(canon))
        self.calibration_id = calibration_id

        self.cnot_error: dict[Link, float] = {}
        for link in self.links:
            a, b = link
            if not (0 <= a < qubit_count and 0 <= b < qubit_count):
                raise ValidationError(f"link {link} references unknown qubit")
            if link not in cnot_error:
                raise ValidationError(f"link {link} has no cnot_error")
            rate = float(cnot_error[link])
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"cnot_error {rate} on link {link} outside [0,1]")
            self.cnot_error[link] = rate

        self.readout_error: dict[int, float] = {}
        for q in range(qubit_count):
            if q not in readout_error:
                raise ValidationError(f"qubit {q} has no readout_error")
            rate = float(readout_error[q])
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"readout_error {rate} on qubit {q} outside [0,1]")
            self.readout_error[q] = rate

        adj: dict[int, set[int]] = {q: set() for q in range(qubit_count)}
        for a, b in self.links:
            adj[a].add(b)
            adj[b].add(a)
        self.adjacency: dict[int, frozenset[int]] = {q: frozenset(nbr) for q, nbr in adj.items()}

        if qubit_count > 1:
            reached = bfs_reachable(self.adjacency, 0, frozenset(range(qubit_count)))
            if len(reached) != qubit_count:
                missing = sorted(set(range(qubit_count)) - reached)
                raise ValidationError(f"device graph is disconnected (unreachable qubits {missing})")

        # Derived caches; the graph itself never mutates after this point.
        self._cfm: dict[int, float] = {}
        self._device_quality: dict[float, float] = {}
        self._diameter: int | None = None

    @property
    def qubits(self) -> range:
        return range(self.qubit_count)

    def neighbors(self, q: int) -> frozenset[int]:
        try:
            return self.adjacency[q]
        except KeyError:
            raise ValidationError(f"unknown qubit {q}") from None

    def degree(self, q: int) -> int:
        return len(self.neighbors(q))

    def link_error(self, a: int, b: int) -> float:
        return self.cnot_error[canonical_link(a, b)]

    def diameter(self) -> int:
        if self._diameter is None:
            everyone = frozenset(self.qubits)
            ecc = 0
            for q in self.qubits:
                dist = hop_distances(self.adjacency, q, everyone)
                ecc = max(ecc, max(dist.values()))
            self._diameter = ecc
        return self._diameter

    def payload(self) -> dict:
        """Serializable snapshot payload (External calibration format)."""
        return {
            "calibration_id": self.calibration_id,
            "qubits": self.qubit_count,
            "readout_error": [self.readout_error[q] for q in self.qubits],
            "links": [list(link) for link in self.links],
            "cnot_error": [self.cnot_error[link] for link in self.links],
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, HardwareGraph):
            return NotImplemented
        return self.payload() == other.payload()

    def __repr__(self) -> str:
        return (
            f"HardwareGraph({self.calibration_id!r}, qubits={self.qubit_count}, "
            f"links={len(self.links)})"
        )


@dataclass(frozen=True)
class PartitionView:
    """Induced subgraph of a device, with inherited error rates."""

    qubits: tuple[int, ...]
    links: tuple[Link, ...]
    cnot_error: dict[Link, float]
    readout_error: dict[int, float]
    connected: bool
    adjacency: dict[int, frozenset[int]]

    def __len__(self) -> int:
        return len(self.qubits)


def subgraph(g: HardwareGraph, qubits: Iterable[int]) -> PartitionView:
    """Induced subgraph over ``qubits``, carrying the parent's error rates."""
    qset = frozenset(qubits)
    for q in qset:
        if q not in g.adjacency:
            raise ValidationError(f"unknown qubit {q}")
    links = tuple(link for link in g.links if link[0] in qset and link[1] in qset)
    adj: dict[int, set[int]] = {q: set() for q in qset}
    for a, b in links:
        adj[a].add(b)
        adj[b].add(a)
    connected = bool(qset) and len(bfs_reachable(adj, min(qset), qset)) == len(qset)
    return PartitionView(
        qubits=tuple(sorted(qset)),
        links=links,
        cnot_error={link: g.cnot_error[link] for link in links},
        readout_error={q: g.readout_error[q] for q in qset},
        connected=connected,
        adjacency={q: frozenset(nbr) for q, nbr in adj.items()},
    )


def bfs_reachable(adjacency: Mapping[int, frozenset[int] | set[int]], start: int, allowed: frozenset[int] | set[int]) -> set[int]:
    """Nodes reachable from ``start`` staying inside ``allowed``."""
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v in allowed and v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def hop_distances(adjacency: Mapping[int, frozenset[int] | set[int]], source: int, allowed: frozenset[int] | set[int]) -> dict[int, int]:
    """Unweighted shortest-path lengths from ``source`` within ``allowed``."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v in allowed and v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def connected_components(nodes: Iterable[int], adjacency: Mapping[int, frozenset[int] | set[int]]) -> list[frozenset[int]]:
    """Connected components of the induced subgraph on ``nodes``, sorted by min member."""
    remaining = set(nodes)
    parts = []
    while remaining:
        start = min(remaining)
        comp = bfs_reachable(adjacency, start, remaining)
        parts.append(frozenset(comp))
        remaining -= comp
    return sorted(parts, key=min)


def set_diameter(adjacency: Mapping[int, frozenset[int] | set[int]], nodes: frozenset[int] | set[int]) -> int:
    """Max pairwise hop distance inside ``nodes``; raises if disconnected."""
    best = 0
    for q in nodes:
        dist = hop_distances(adjacency, q, nodes)
        if len(dist) != len(nodes):
            raise ValidationError("diameter undefined on a disconnected qubit set")
        best = max(best, max(dist.values()))
    return best


def _line_links(n: int) -> list[Link]:
    return [(i, i + 1) for i in range(n - 1)]


def _ring_links(n: int) -> list[Link]:
    links = _line_links(n)
    if n > 2:
        links.append(canonical_link(n - 1, 0))
    return links


def _grid_links(rows: int, cols: int) -> list[Link]:
    links = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                links.append((q, q + 1))
            if r + 1 < rows:
                links.append((q, q + cols))
    return links


def generate_topology(
    kind: str,
    n: int | None = None,
    rows: int | None = None,
    cols: int | None = None,
    seed: int = 0,
    cnot_range: tuple[float, float] = (0.005, 0.03),
    readout_range: tuple[float, float] = (0.01, 0.05),
) -> HardwareGraph:
    """Deterministic synthetic device for the given template and seed.

    Error rates are sampled uniformly from the given ranges; the same
    (kind, size, seed, ranges) arguments always yield an identical graph.
    """
    import random

    for lo, hi in (cnot_range, readout_range):
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValidationError(f"error range ({lo}, {hi}) invalid")

    if kind == "heavy-hex-27":
        count, links = 27, list(HEAVY_HEX_27_LINKS)
        label = "heavy-hex-27"
    elif kind == "line":
        if n is None or n < 2:
            raise ValidationError("line topology needs n >= 2")
        count, links, label = n, _line_links(n), f"line-{n}"
    elif kind == "ring":
        if n is None or n < 3:
            raise ValidationError("ring topology needs n >= 3")
        count, links, label = n, _ring_links(n), f"ring-{n}"
    elif kind == "grid":
        if rows is None or cols is None or rows < 1 or cols < 1 or rows * cols < 2:
            raise ValidationError("grid topology needs rows and cols with rows*cols >= 2")
        count, links, label = rows * cols, _grid_links(rows, cols), f"grid-{rows}x{cols}"
    else:
        raise ValidationError(f"unknown topology kind {kind!r} (expected one of {TOPOLOGY_KINDS})")

    rng = random.Random(f"{label}:{seed}")
    cnot = {canonical_link(*link): rng.uniform(*cnot_range) for link in links}
    readout = {q: rng.uniform(*readout_range) for q in range(count)}
    return HardwareGraph(count, links, cnot, readout, calibration_id=f"{label}-s{seed}")


def parse_snapshot(payload: dict) -> HardwareGraph:
    """Validate a decoded calibration payload into a HardwareGraph.

    Directed duplicates (both (a,b) and (b,a) present) are averaged into one
    undirected rate; repeating the same orientation is rejected.
    """
    try:
        calibration_id = str(payload["calibration_id"])
        qubit_count = int(payload["qubits"])
        readout_list = payload["readout_error"]
        link_list = payload["links"]
        cnot_list = payload["cnot_error"]
    except (KeyError, TypeError) as exc:
        raise SnapshotError(f"snapshot missing or malformed field: {exc}") from exc
    if len(cnot_list) != len(link_list):
        raise SnapshotError(
            f"cnot_error length {len(cnot_list)} does not match links length {len(link_list)}"
        )
    if len(readout_list) != qubit_count:
        raise SnapshotError(
            f"readout_error length {len(readout_list)} does not match qubit count {qubit_count}"
        )

    seen_directed: set[tuple[int, int]] = set()
    rates: dict[Link, list[float]] = {}
    for raw, rate in zip(link_list, cnot_list):
        try:
            a, b = int(raw[0]), int(raw[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise SnapshotError(f"malformed link entry {raw!r}") from exc
        if (a, b) in seen_directed:
            raise ValidationError(f"duplicate link ({a}, {b})")
        seen_directed.add((a, b))
        rates.setdefault(canonical_link(a, b), []).append(float(rate))

    cnot = {link: sum(vals) / len(vals) for link, vals in rates.items()}
    readout = {q: float(readout_list[q]) for q in range(qubit_count)}
    return HardwareGraph(qubit_count, list(cnot), cnot, readout, calibration_id=calibration_id)


def load_snapshot(path: str) -> HardwareGraph:
    """Load and validate a calibration snapshot file (JSON, UTF-8)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise SnapshotError(f"{path}: snapshot must be a JSON object")
    return parse_snapshot(payload)


def save_snapshot(g: HardwareGraph, path: str, timestamp: str | None = None) -> None:
    """Write the calibration snapshot format; inverse of load_snapshot."""
    payload = g.payload()
    if timestamp is not None:
        payload["timestamp"] = timestamp
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def from_spec(
    spec: str,
    seed: int = 0,
    cnot_range: tuple[float, float] = (0.005, 0.03),
    readout_range: tuple[float, float] = (0.01, 0.05),
) -> HardwareGraph:
    """Resolve a backend argument: a snapshot path or a template spec.

    Template specs: ``heavy-hex-27``, ``line:N``, ``ring:N``, ``grid:RxC``.
    Anything else is treated as a file path.
    """
    if spec == "heavy-hex-27":
        return generate_topology("heavy-hex-27", seed=seed, cnot_range=cnot_range, readout_range=readout_range)
    if ":" in spec:
        kind, _, size = spec.partition(":")
        if kind in ("line", "ring") and size.isdigit():
            return generate_topology(kind, n=int(size), seed=seed, cnot_range=cnot_range, readout_range=readout_range)
        if kind == "grid" and "x" in size:
            r, _, c = size.partition("x")
            if r.isdigit() and c.isdigit():
                return generate_topology("grid", rows=int(r), cols=int(c), seed=seed, cnot_range=cnot_range, readout_range=readout_range)
    return load_snapshot(spec)
