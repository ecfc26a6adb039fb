"""Queue construction, experiment sweeps, and report emission.

A queue cell is the tuple (backend, queue, method, seed [, crosstalk
config]); every emitted number is traceable to its cell.  Hierarchy trees
are built once per backend outside the timed region, mirroring how they are
reused across a calibration cycle.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import allocators, metrics, routing, secure
from .allocators import AllocationPlan
from .circuits import ProgramProfile, load_bundled, parse_qasm_file
from .community import HierarchyTree, build_hierarchy
from .topology import HardwareGraph, ValidationError

METHOD_ALIASES = {
    "attractor": allocators.METHOD_ATTRACTOR,
    "cri": allocators.METHOD_CRI_GREEDY,
    "cri_greedy": allocators.METHOD_CRI_GREEDY,
    "comdap": allocators.METHOD_COMDAP,
    "secure-general": allocators.METHOD_SECURE_GENERAL,
    "comdap_secure_general": allocators.METHOD_SECURE_GENERAL,
    "secure-smart": allocators.METHOD_SECURE_SMART,
    "comdap_secure_smart": allocators.METHOD_SECURE_SMART,
}
ALL_METHODS = (
    allocators.METHOD_ATTRACTOR,
    allocators.METHOD_CRI_GREEDY,
    allocators.METHOD_COMDAP,
    allocators.METHOD_SECURE_GENERAL,
    allocators.METHOD_SECURE_SMART,
)
TREE_METHODS = (
    allocators.METHOD_COMDAP,
    allocators.METHOD_SECURE_GENERAL,
    allocators.METHOD_SECURE_SMART,
)


def resolve_method(name: str) -> str:
    try:
        return METHOD_ALIASES[name]
    except KeyError:
        raise ValidationError(
            f"unknown method {name!r} (expected one of {sorted(set(METHOD_ALIASES))})"
        ) from None


@dataclass(frozen=True)
class QueueEntry:
    program: ProgramProfile
    group: str
    priority: int
    arrival_index: int


@dataclass(frozen=True)
class QueueSpec:
    name: str
    entries: tuple[QueueEntry, ...]

    def __post_init__(self):
        arrivals = [e.arrival_index for e in self.entries]
        if any(b <= a for a, b in zip(arrivals, arrivals[1:])):
            raise ValidationError(f"queue {self.name}: arrival indices must strictly increase")

    def total_demand(self) -> int:
        return sum(e.program.logical_qubits for e in self.entries)


def fair_share_order(q: QueueSpec, usage: dict[str, float] | None = None) -> list[ProgramProfile]:
    """Programs ordered by least-consumed group share, FIFO within a group."""
    usage = usage or {}
    ordered = sorted(
        q.entries, key=lambda e: (usage.get(e.group, 0.0), e.arrival_index)
    )
    return [
        e.program.with_queue_info(e.priority, e.arrival_index) for e in ordered
    ]


def make_queues(
    corpus: Sequence[ProgramProfile],
    depth: int,
    seed: int,
    device_size: int,
    groups: Sequence[str] = ("g0", "g1", "g2"),
) -> QueueSpec:
    """Seeded queue whose total qubit demand exceeds the device size."""
    import random

    if not corpus:
        raise ValidationError("empty corpus")
    rng = random.Random(f"queue:{seed}")
    picks = [rng.choice(corpus) for _ in range(depth)]
    while sum(p.logical_qubits for p in picks) <= device_size:
        picks.append(rng.choice(corpus))
    entries = tuple(
        QueueEntry(
            program=p,
            group=groups[rng.randrange(len(groups))],
            priority=rng.randrange(3),
            arrival_index=i,
        )
        for i, p in enumerate(picks)
    )
    return QueueSpec(name=f"queue-s{seed}", entries=entries)


def load_queue_file(path: str) -> QueueSpec:
    """Queue spec JSON: [{"file": str, "priority": int, "group"?: str}, ...].

    ``file`` is a .qasm path; a bare name falls back to the bundled corpus.
    """
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, list):
        raise ValidationError(f"{path}: queue spec must be a JSON array")
    entries = []
    for i, item in enumerate(payload):
        ref = item["file"]
        priority = int(item.get("priority", 0))
        group = str(item.get("group", "default"))
        if os.path.exists(ref):
            program = parse_qasm_file(ref)
        else:
            program = load_bundled(ref.removesuffix(".qasm"))
        entries.append(QueueEntry(program, group, priority, i))
    name = os.path.basename(path).rsplit(".", 1)[0]
    return QueueSpec(name=name, entries=tuple(entries))


@dataclass(frozen=True)
class CrosstalkSweep:
    """Random crosstalk configurations: ``count`` models per k in ``k_values``."""

    k_values: tuple[int, ...]
    count: int
    seed: int


@dataclass
class ExperimentReport:
    manifest: dict
    utilization_rows: list[dict] = field(default_factory=list)
    cri_rows: list[dict] = field(default_factory=list)
    routing_rows: list[dict] = field(default_factory=list)
    timing_rows: list[dict] = field(default_factory=list)


def run_allocation(
    method: str,
    programs: Sequence[ProgramProfile],
    g: HardwareGraph,
    tree: HierarchyTree | None = None,
    enum_cap: int = allocators.DEFAULT_ENUM_CAP,
    seed: int = 0,
    alpha: float = metrics.DEFAULT_ALPHA,
    model: secure.CrosstalkModel | None = None,
) -> AllocationPlan:
    """Dispatch one allocation run for a canonical method name."""
    method = resolve_method(method)
    if method == allocators.METHOD_ATTRACTOR:
        return allocators.allocate_attractor(programs, g, alpha=alpha)
    if method == allocators.METHOD_CRI_GREEDY:
        return allocators.allocate_cri_greedy(programs, g, enum_cap=enum_cap, seed=seed, alpha=alpha)
    if tree is None:
        raise ValidationError(f"method {method} needs a hierarchy tree")
    if method == allocators.METHOD_COMDAP:
        return allocators.allocate_comdap(programs, tree, g, alpha=alpha)
    if method == allocators.METHOD_SECURE_GENERAL:
        return secure.allocate_comdap_secure_general(programs, tree, g, alpha=alpha)
    if method == allocators.METHOD_SECURE_SMART:
        if model is None:
            raise ValidationError("secure-smart needs a crosstalk model")
        return secure.allocate_comdap_secure_smart(programs, tree, g, model, alpha=alpha)
    raise ValidationError(f"unhandled method {method}")


def _recheck_utilization(plan: AllocationPlan, g: HardwareGraph) -> float:
    """Double-entry check: utilization recomputed from the emitted partitions."""
    used: set[int] = set()
    for p in plan.partitions:
        used.update(p.qubits)
    value = len(used) / g.qubit_count
    if abs(value - plan.utilization) > 1e-12:
        raise AssertionError(
            f"utilization mismatch: plan says {plan.utilization}, partitions say {value}"
        )
    return value


def _routing_rows(plan: AllocationPlan, g: HardwareGraph, cell: dict) -> Iterable[dict]:
    for partition in plan.partitions:
        report = routing.route_partition(partition, g)
        if report.cx_after != report.cx_before + routing.SWAP_CX_COST * report.swaps_inserted:
            raise AssertionError("CX accounting identity violated")
        yield {
            **cell,
            "program": partition.program.name,
            "partition_size": len(partition.qubits),
            "swaps_inserted": report.swaps_inserted,
            "cx_before": report.cx_before,
            "cx_after": report.cx_after,
            "depth_before": report.depth_before,
            "depth_after": report.depth_after,
            "delta_cx_ratio": report.delta_cx_ratio,
            "delta_depth_ratio": report.delta_depth_ratio,
        }


def run_experiment(
    backends: Sequence[HardwareGraph],
    queues: Sequence[QueueSpec],
    methods: Sequence[str],
    seeds: Sequence[int] = (0,),
    crosstalk: CrosstalkSweep | None = None,
    enum_cap: int = allocators.DEFAULT_ENUM_CAP,
    alpha: float = metrics.DEFAULT_ALPHA,
    gamma: float = 1.0,
    tree_seed: int = 0,
    usage: dict[str, float] | None = None,
    route_programs: bool = True,
) -> ExperimentReport:
    """Run every (backend, queue, method, seed [, config]) cell and collect rows.

    Deterministic apart from the elapsed-time fields.  Failed allocations
    surface as unallocated entries, never as errors.
    """
    methods = [resolve_method(m) for m in methods]
    report = ExperimentReport(
        manifest={
            "backends": [g.calibration_id for g in backends],
            "queues": [q.name for q in queues],
            "methods": list(methods),
            "seeds": list(seeds),
            "alpha": alpha,
            "gamma": gamma,
            "tree_seed": tree_seed,
            "enum_cap": enum_cap,
            "crosstalk": (
                {"k_values": list(crosstalk.k_values), "count": crosstalk.count, "seed": crosstalk.seed}
                if crosstalk
                else None
            ),
            "cells": [],
        }
    )

    for g in backends:
        tree = (
            build_hierarchy(g, gamma=gamma, seed=tree_seed, alpha=alpha)
            if any(m in TREE_METHODS for m in methods)
            else None
        )
        sweep_models: dict[int, list[secure.CrosstalkModel]] = {}
        if crosstalk is not None:
            for k in crosstalk.k_values:
                sweep_models[k] = secure.generate_crosstalk_configs(
                    g, k, crosstalk.count, crosstalk.seed
                )
        for queue in queues:
            for method in methods:
                for seed in seeds:
                    if method == allocators.METHOD_SECURE_SMART and sweep_models:
                        cells = [
                            (k, i, model)
                            for k, models in sorted(sweep_models.items())
                            for i, model in enumerate(models)
                        ]
                    else:
                        cells = [(None, None, None)]
                    for k, config_index, model in cells:
                        cell = {
                            "backend": g.calibration_id,
                            "queue": queue.name,
                            "method": method,
                            "seed": seed,
                            "config_k": "" if k is None else k,
                            "config_index": "" if config_index is None else config_index,
                        }
                        programs = fair_share_order(queue, usage)
                        start = time.perf_counter()
                        plan = run_allocation(
                            method, programs, g, tree=tree,
                            enum_cap=enum_cap, seed=seed, alpha=alpha, model=model,
                        )
                        elapsed_ms = (time.perf_counter() - start) * 1000.0
                        report.manifest["cells"].append(dict(cell))
                        report.utilization_rows.append(
                            {
                                **cell,
                                "utilization": plan.utilization,
                                "utilization_recheck": _recheck_utilization(plan, g),
                                "allocated_programs": len(plan.partitions),
                                "total_programs": len(programs),
                                "padded_qubits": len(plan.padded_qubits),
                            }
                        )
                        report.timing_rows.append({**cell, "elapsed_ms": elapsed_ms})
                        for partition in plan.partitions:
                            report.cri_rows.append(
                                {
                                    **cell,
                                    "program": partition.program.name,
                                    "partition_size": len(partition.qubits),
                                    "cri": partition.cri,
                                }
                            )
                        if route_programs and model is None:
                            report.routing_rows.extend(_routing_rows(plan, g, cell))
    return report


_CSV_FILES = {
    "utilization.csv": "utilization_rows",
    "cri.csv": "cri_rows",
    "routing.csv": "routing_rows",
    "timing.csv": "timing_rows",
}


def write_report(report: ExperimentReport, outdir: str, figures: bool = True) -> list[str]:
    """Write manifest + CSVs (+ rendered figures); returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    manifest_path = os.path.join(outdir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(report.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(manifest_path)
    for filename, attr in _CSV_FILES.items():
        rows = getattr(report, attr)
        path = os.path.join(outdir, filename)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
            else:
                fh.write("")
        written.append(path)
    if figures:
        from . import plotting

        written.extend(plotting.render_report_figures(report, os.path.join(outdir, "figures")))
    return written
