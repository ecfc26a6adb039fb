"""Figure rendering for experiment reports.

Every bench run drops PNG figures next to the CSVs: utilization bars, CRI
distributions, routing overhead, timing, and the crosstalk sweep when one
was requested.
"""

from __future__ import annotations

import os
from collections import defaultdict
from statistics import mean

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_METHOD_ORDER = (
    "attractor",
    "cri_greedy",
    "comdap",
    "comdap_secure_general",
    "comdap_secure_smart",
)


def _methods_present(rows) -> list[str]:
    present = {row["method"] for row in rows}
    return [m for m in _METHOD_ORDER if m in present] + sorted(present - set(_METHOD_ORDER))


def _group_by_method(rows, value_key):
    grouped = defaultdict(list)
    for row in rows:
        grouped[row["method"]].append(row[value_key])
    return grouped


def plot_utilization(rows, path: str) -> None:
    grouped = _group_by_method(rows, "utilization")
    methods = _methods_present(rows)
    fig, ax = plt.subplots(figsize=(7, 4))
    means = [mean(grouped[m]) for m in methods]
    ax.bar(range(len(methods)), means, color="#3b6ea5", alpha=0.8)
    for i, m in enumerate(methods):
        ax.plot([i] * len(grouped[m]), grouped[m], "k.", alpha=0.4, markersize=4)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("hardware utilization")
    ax.set_ylim(0, 1.05)
    ax.set_title("Mean utilization by method")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cri(rows, path: str) -> None:
    grouped = _group_by_method(rows, "cri")
    methods = _methods_present(rows)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.boxplot([grouped[m] for m in methods], tick_labels=methods)
    ax.axhline(1.0, linestyle="--", color="grey", linewidth=1)
    ax.set_ylabel("partition CRI")
    ax.set_title("CRI distribution of allocated partitions")
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_routing(rows, path: str) -> None:
    methods = _methods_present(rows)
    cx = _group_by_method(rows, "delta_cx_ratio")
    depth = _group_by_method(rows, "delta_depth_ratio")
    x = range(len(methods))
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.35
    ax.bar([i - width / 2 for i in x], [mean(cx[m]) for m in methods], width, label="delta CX")
    ax.bar([i + width / 2 for i in x], [mean(depth[m]) for m in methods], width, label="delta depth")
    ax.set_xticks(list(x))
    ax.set_xticklabels(methods, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("relative increase")
    ax.set_title("Post-mapping overhead by method")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_timing(rows, path: str) -> None:
    grouped = _group_by_method(rows, "elapsed_ms")
    methods = _methods_present(rows)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.boxplot([grouped[m] for m in methods], tick_labels=methods)
    ax.set_yscale("log")
    ax.set_ylabel("per-queue wall time (ms)")
    ax.set_title("Allocation time by method")
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_crosstalk_sweep(rows, path: str) -> None:
    """Mean utilization vs crosstalk-prone couple count, per method."""
    sweep = defaultdict(lambda: defaultdict(list))
    flat = defaultdict(list)
    for row in rows:
        if row.get("config_k", "") != "":
            sweep[row["method"]][row["config_k"]].append(row["utilization"])
        else:
            flat[row["method"]].append(row["utilization"])
    if not sweep:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    for method, by_k in sorted(sweep.items()):
        ks = sorted(by_k)
        ax.plot(ks, [mean(by_k[k]) for k in ks], marker="o", label=method)
    for method in ("comdap", "comdap_secure_general"):
        if method in flat:
            ax.axhline(mean(flat[method]), linestyle=":", linewidth=1, label=f"{method} (flat)")
    ax.set_xlabel("crosstalk-prone link couples (k)")
    ax.set_ylabel("mean utilization")
    ax.set_ylim(0, 1.05)
    ax.set_title("Utilization under crosstalk padding")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(report, figdir: str) -> list[str]:
    """Render every figure the report's rows support; returns written paths."""
    os.makedirs(figdir, exist_ok=True)
    written = []
    jobs = [
        (report.utilization_rows, plot_utilization, "utilization_by_method.png"),
        (report.cri_rows, plot_cri, "cri_distribution.png"),
        (report.routing_rows, plot_routing, "routing_overhead.png"),
        (report.timing_rows, plot_timing, "timing_by_method.png"),
        (report.utilization_rows, plot_crosstalk_sweep, "crosstalk_sweep.png"),
    ]
    for rows, fn, name in jobs:
        if not rows:
            continue
        path = os.path.join(figdir, name)
        fn(rows, path)
        if os.path.exists(path):
            written.append(path)
    return written
