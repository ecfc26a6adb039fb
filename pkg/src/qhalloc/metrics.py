"""Partition quality scores: density, compactness, per-qubit fidelity, CRI.

The Connectivity and Reliability Index (CRI) normalizes a partition's
structure and error profile against the whole device: 1.0 means "as good as
the unpartitioned hardware", above 1.0 better, below 1.0 worse.
"""

from __future__ import annotations

from dataclasses import dataclass

from .topology import (
    HardwareGraph,
    PartitionView,
    ValidationError,
    hop_distances,
    set_diameter,
)

DEFAULT_ALPHA = 1.0


@dataclass(frozen=True)
class PartitionMetrics:
    density: float
    compactness: float
    avg_cnot_error: float
    avg_readout_error: float
    cri: float
    alpha: float


def density(p: PartitionView) -> float:
    """Actual links over possible links, 2E / N(N-1).  Needs N >= 2."""
    n = len(p.qubits)
    if n < 2:
        raise ValidationError("density undefined for fewer than 2 qubits (use cri_single)")
    return 2.0 * len(p.links) / (n * (n - 1))


def compactness(p: PartitionView) -> float:
    """Hop diameter over the max possible diameter N-1 (a simple path)."""
    n = len(p.qubits)
    if n < 2:
        raise ValidationError("compactness undefined for fewer than 2 qubits")
    if not p.connected:
        raise ValidationError("compactness undefined on a disconnected partition")
    qset = frozenset(p.qubits)
    return set_diameter(p.adjacency, qset) / (n - 1)


def cfm(g: HardwareGraph, q: int) -> float:
    """Composite per-qubit fidelity: degree plus one minus summed error rates."""
    cached = g._cfm.get(q)
    if cached is not None:
        return cached
    nbrs = g.neighbors(q)
    avg_cnot = (
        sum(g.link_error(q, v) for v in nbrs) / len(nbrs) if nbrs else 0.0
    )
    value = len(nbrs) + (1.0 - (avg_cnot + g.readout_error[q]))
    g._cfm[q] = value
    return value


def _quality_of_set(g: HardwareGraph, qubits: frozenset[int], alpha: float) -> float:
    """Unnormalized partition quality D/C + alpha*(1-(E+R)) for a connected set."""
    n = len(qubits)
    link_count = 0
    err_sum = 0.0
    ecc = 0
    for q in qubits:
        inside = g.adjacency[q] & qubits
        for v in inside:
            if v > q:
                link_count += 1
                err_sum += g.cnot_error[(q, v)]
        dist = hop_distances(g.adjacency, q, qubits)
        if len(dist) != n:
            raise ValidationError("partition is disconnected; CRI undefined")
        ecc = max(ecc, max(dist.values()))
    dens = 2.0 * link_count / (n * (n - 1))
    comp = ecc / (n - 1)
    avg_cnot = err_sum / link_count
    avg_readout = sum(g.readout_error[q] for q in qubits) / n
    return dens / comp + alpha * (1.0 - (avg_cnot + avg_readout))


def device_quality(g: HardwareGraph, alpha: float = DEFAULT_ALPHA) -> float:
    """Whole-device quality term; the denominator every CRI is normalized by."""
    cached = g._device_quality.get(alpha)
    if cached is not None:
        return cached
    if g.qubit_count < 2:
        raise ValidationError("CRI needs a device with at least 2 qubits")
    value = _quality_of_set(g, frozenset(g.qubits), alpha)
    if value <= 0.0:
        raise ValidationError(
            f"device quality term {value:.6g} is not positive "
            f"(calibration too noisy for alpha={alpha}); CRI undefined"
        )
    g._device_quality[alpha] = value
    return value


def cri_of_set(g: HardwareGraph, qubits: frozenset[int], alpha: float = DEFAULT_ALPHA) -> float:
    """CRI of a connected qubit set; single qubits use the cri_single convention."""
    if len(qubits) == 1:
        return cri_single(next(iter(qubits)), g, alpha)
    return _quality_of_set(g, qubits, alpha) / device_quality(g, alpha)


def cri(p: PartitionView, g: HardwareGraph, alpha: float = DEFAULT_ALPHA) -> float:
    """CRI of a partition relative to the whole device.

    Structure term is density over compactness; error term weighs average
    two-qubit and readout error rates by ``alpha``.  Only links internal to
    the partition count toward its average CNOT error.
    """
    if len(p.qubits) < 2:
        raise ValidationError("CRI undefined for fewer than 2 qubits (use cri_single)")
    if not p.connected:
        raise ValidationError("CRI undefined on a disconnected partition")
    return cri_of_set(g, frozenset(p.qubits), alpha)


def cri_single(q: int, g: HardwareGraph, alpha: float = DEFAULT_ALPHA) -> float:
    """One-qubit CRI convention: structure term fixed at 1, errors from q alone."""
    nbrs = g.neighbors(q)
    avg_cnot = sum(g.link_error(q, v) for v in nbrs) / len(nbrs) if nbrs else 0.0
    numerator = 1.0 + alpha * (1.0 - (avg_cnot + g.readout_error[q]))
    return numerator / device_quality(g, alpha)


def partition_metrics(p: PartitionView, g: HardwareGraph, alpha: float = DEFAULT_ALPHA) -> PartitionMetrics:
    """Full metric record for one partition (the `metrics` CLI payload)."""
    d = density(p)
    c = compactness(p)
    avg_cnot = sum(p.cnot_error.values()) / len(p.links) if p.links else 0.0
    avg_readout = sum(p.readout_error.values()) / len(p.qubits)
    return PartitionMetrics(
        density=d,
        compactness=c,
        avg_cnot_error=avg_cnot,
        avg_readout_error=avg_readout,
        cri=cri(p, g, alpha),
        alpha=alpha,
    )
