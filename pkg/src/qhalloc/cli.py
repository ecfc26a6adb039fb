"""Command-line entry point.

Subcommands: tree, metrics, allocate, route, bench, gen-backend,
gen-crosstalk.  Exit codes: 0 success, 1 validation error, 2 I/O error.
Diagnostics go to stderr; data goes to files or stdout.  Every run records
its full effective configuration in a manifest (a file next to the output,
or stderr for stdout-only commands).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import allocators, bench, community, metrics, routing, secure, topology
from .circuits import QasmError, bundled_corpus
from .topology import SnapshotError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _parse_config_file(path: str) -> dict:
    """Flat ``key = value`` config; strings, numbers and booleans only."""
    out: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip().strip('"').strip("'")
            if value.lower() in ("true", "false"):
                out[key] = value.lower() == "true"
            else:
                try:
                    out[key] = int(value)
                except ValueError:
                    try:
                        out[key] = float(value)
                    except ValueError:
                        out[key] = value
    return out


def _parse_kv(text: str, fields: tuple[str, ...]) -> dict[str, int]:
    out = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in fields:
            raise ValidationError(f"unknown key {key!r} in {text!r} (expected {fields})")
        try:
            out[key] = int(value)
        except ValueError:
            raise ValidationError(f"{key} needs an integer, got {value!r}") from None
    return out


def _load_backend(args) -> topology.HardwareGraph:
    return topology.from_spec(args.backend, seed=getattr(args, "backend_seed", 0))


def _manifest(args, extra: dict | None = None) -> dict:
    payload = {
        key: value for key, value in sorted(vars(args).items()) if key != "func"
    }
    if extra:
        payload.update(extra)
    return payload


def _emit_manifest(args, out_path: str | None, extra: dict | None = None) -> None:
    manifest = _manifest(args, extra)
    if out_path:
        base = out_path.rstrip("/")
        if os.path.isdir(base):
            path = os.path.join(base, "manifest.json")
        else:
            path = base + ".manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        print(f"manifest: {json.dumps(manifest, sort_keys=True)}", file=sys.stderr)


def _crosstalk_model(args, g) -> secure.CrosstalkModel | None:
    if getattr(args, "crosstalk", None):
        model = secure.load_crosstalk(args.crosstalk)
        secure.validate_model(model, g)
        return model
    if getattr(args, "crosstalk_random", None):
        kv = _parse_kv(args.crosstalk_random, ("k", "count", "seed"))
        models = secure.generate_crosstalk_configs(
            g, kv.get("k", 1), kv.get("count", 1), kv.get("seed", 0)
        )
        return models[0]
    return None


def cmd_tree(args) -> int:
    g = _load_backend(args)
    tree = community.build_hierarchy(
        g,
        gamma=args.gamma,
        seed=args.seed,
        max_leaf_community=args.max_leaf,
        alpha=args.alpha,
        raw_error_weights=args.raw_error_weights,
    )
    text = community.tree_to_json(tree)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    _emit_manifest(args, args.out, {"calibration_id": g.calibration_id})
    return EXIT_OK


def cmd_metrics(args) -> int:
    g = _load_backend(args)
    try:
        qubits = [int(tok) for tok in args.qubits.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValidationError(f"--qubits expects a comma-separated integer list, got {args.qubits!r}")
    view = topology.subgraph(g, qubits)
    record = metrics.partition_metrics(view, g, alpha=args.alpha)
    writer = csv.writer(sys.stdout)
    writer.writerow(["backend", "qubits", "density", "compactness", "avg_cnot_error", "avg_readout_error", "alpha", "cri"])
    writer.writerow(
        [
            g.calibration_id,
            " ".join(str(q) for q in view.qubits),
            f"{record.density:.9g}",
            f"{record.compactness:.9g}",
            f"{record.avg_cnot_error:.9g}",
            f"{record.avg_readout_error:.9g}",
            f"{record.alpha:.9g}",
            f"{record.cri:.9g}",
        ]
    )
    _emit_manifest(args, None, {"calibration_id": g.calibration_id})
    return EXIT_OK


def _plan_to_dict(plan: allocators.AllocationPlan, g, method: str, args) -> dict:
    return {
        "backend": g.calibration_id,
        "method": method,
        "alpha": args.alpha,
        "utilization": plan.utilization,
        "partitions": [
            {"program": p.program.name, "qubits": list(p.qubits), "cri": p.cri}
            for p in plan.partitions
        ],
        "padded_qubits": sorted(plan.padded_qubits),
        "unallocated": [p.name for p in plan.unallocated],
    }


def cmd_allocate(args) -> int:
    g = _load_backend(args)
    queue = bench.load_queue_file(args.queue)
    programs = bench.fair_share_order(queue)
    method = bench.resolve_method(args.method)
    tree = None
    if method in bench.TREE_METHODS:
        tree = community.build_hierarchy(g, gamma=args.gamma, seed=args.tree_seed, alpha=args.alpha)
    model = _crosstalk_model(args, g)
    plan = bench.run_allocation(
        method, programs, g, tree=tree, enum_cap=args.enum_cap,
        seed=args.seed, alpha=args.alpha, model=model,
    )
    payload = _plan_to_dict(plan, g, method, args)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    _emit_manifest(args, args.out, {"calibration_id": g.calibration_id})
    return EXIT_OK


_ROUTING_FIELDS = (
    "program", "qubits", "swaps_inserted", "cx_before", "cx_after",
    "depth_before", "depth_after", "delta_cx_ratio", "delta_depth_ratio",
)


def cmd_route(args) -> int:
    g = _load_backend(args)
    queue = bench.load_queue_file(args.queue)
    by_name = {}
    for entry in queue.entries:
        by_name.setdefault(entry.program.name, entry.program)
    with open(args.plan, "r", encoding="utf-8") as fh:
        plan_payload = json.load(fh)
    rows = []
    for item in plan_payload["partitions"]:
        name = item["program"]
        if name not in by_name:
            raise ValidationError(f"plan references program {name!r} missing from the queue spec")
        program = by_name[name]
        partition = allocators.Partition(
            qubits=tuple(sorted(item["qubits"])),
            cri=float(item["cri"]),
            program=program,
            method=plan_payload.get("method", "unknown"),
        )
        report = routing.route_partition(partition, g)
        rows.append(
            [
                name,
                " ".join(str(q) for q in partition.qubits),
                report.swaps_inserted,
                report.cx_before,
                report.cx_after,
                report.depth_before,
                report.depth_after,
                f"{report.delta_cx_ratio:.9g}",
                f"{report.delta_depth_ratio:.9g}",
            ]
        )
    sink = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(sink)
        writer.writerow(_ROUTING_FIELDS)
        writer.writerows(rows)
    finally:
        if args.out:
            sink.close()
    _emit_manifest(args, args.out, {"calibration_id": g.calibration_id})
    return EXIT_OK


def cmd_bench(args) -> int:
    backends = [
        topology.from_spec(spec.strip(), seed=args.backend_seed)
        for spec in args.backends.split(",")
    ]
    corpus = bundled_corpus()
    device_size = max(g.qubit_count for g in backends)
    queues = [
        bench.make_queues(corpus, depth=args.queue_depth, seed=args.queue_seed + i, device_size=device_size)
        for i in range(args.queues)
    ]
    if args.methods == "all":
        methods = list(bench.ALL_METHODS)
    else:
        methods = [bench.resolve_method(tok.strip()) for tok in args.methods.split(",")]
    sweep = None
    if args.crosstalk_random:
        kv = _parse_kv(args.crosstalk_random, ("k", "kmax", "count", "seed"))
        k_lo = kv.get("k", 1)
        k_hi = kv.get("kmax", k_lo)
        sweep = bench.CrosstalkSweep(
            k_values=tuple(range(k_lo, k_hi + 1)),
            count=kv.get("count", 1),
            seed=kv.get("seed", 0),
        )
    elif allocators.METHOD_SECURE_SMART in methods:
        sweep = bench.CrosstalkSweep(k_values=(4,), count=1, seed=args.seeds[0] if args.seeds else 0)
    report = bench.run_experiment(
        backends,
        queues,
        methods,
        seeds=args.seeds,
        crosstalk=sweep,
        enum_cap=args.enum_cap,
        alpha=args.alpha,
        gamma=args.gamma,
        tree_seed=args.tree_seed,
    )
    written = bench.write_report(report, args.out, figures=not args.no_figures)
    for path in written:
        print(path, file=sys.stderr)
    return EXIT_OK


def cmd_gen_backend(args) -> int:
    g = topology.generate_topology(
        args.kind,
        n=args.n,
        rows=args.rows,
        cols=args.cols,
        seed=args.seed,
        cnot_range=(args.cnot_lo, args.cnot_hi),
        readout_range=(args.readout_lo, args.readout_hi),
    )
    topology.save_snapshot(g, args.out)
    _emit_manifest(args, args.out, {"calibration_id": g.calibration_id, "links": len(g.links)})
    return EXIT_OK


def cmd_gen_crosstalk(args) -> int:
    g = _load_backend(args)
    models = secure.generate_crosstalk_configs(g, args.k, args.count, args.seed)
    secure.save_crosstalk(models, args.out)
    _emit_manifest(args, args.out, {"calibration_id": g.calibration_id, "configs": len(models)})
    return EXIT_OK


def _add_backend_options(sp) -> None:
    sp.add_argument("--backend", required=True, help="snapshot path or template (heavy-hex-27, line:N, ring:N, grid:RxC)")
    sp.add_argument("--backend-seed", type=int, default=0, help="seed for template error rates")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="qhalloc",
        description="Partitioning and allocation of multi-tenant quantum hardware",
    )
    parser.add_argument("--config", help="flat key = value config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    registry = {}

    sp = sub.add_parser("tree", help="build and serialize the community hierarchy tree")
    _add_backend_options(sp)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--max-leaf", type=int, default=community.DEFAULT_MAX_LEAF_COMMUNITY)
    sp.add_argument("--raw-error-weights", action="store_true",
                    help="cluster on raw error rates instead of fidelities")
    sp.add_argument("--out", help="output JSON path (stdout if omitted)")
    sp.set_defaults(func=cmd_tree)
    registry["tree"] = sp

    sp = sub.add_parser("metrics", help="score one qubit set against the device")
    _add_backend_options(sp)
    sp.add_argument("--qubits", required=True, help="comma-separated qubit ids")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.set_defaults(func=cmd_metrics)
    registry["metrics"] = sp

    sp = sub.add_parser("allocate", help="allocate a program queue onto the device")
    _add_backend_options(sp)
    sp.add_argument("--queue", required=True, help="queue spec JSON")
    sp.add_argument("--method", required=True,
                    help="attractor | cri | comdap | secure-general | secure-smart")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--enum-cap", type=int, default=allocators.DEFAULT_ENUM_CAP)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--tree-seed", type=int, default=0)
    sp.add_argument("--crosstalk", help="crosstalk config JSON (for secure-smart)")
    sp.add_argument("--crosstalk-random", help="k=K,count=C,seed=S random crosstalk config")
    sp.add_argument("--out", help="plan JSON path (stdout if omitted)")
    sp.set_defaults(func=cmd_allocate)
    registry["allocate"] = sp

    sp = sub.add_parser("route", help="map and route an allocation plan")
    _add_backend_options(sp)
    sp.add_argument("--plan", required=True, help="plan JSON from `allocate`")
    sp.add_argument("--queue", required=True, help="queue spec JSON")
    sp.add_argument("--out", help="routing CSV path (stdout if omitted)")
    sp.set_defaults(func=cmd_route)
    registry["route"] = sp

    sp = sub.add_parser("bench", help="run the experiment harness and emit reports")
    sp.add_argument("--backends", default="heavy-hex-27", help="comma-separated backend specs")
    sp.add_argument("--backend-seed", type=int, default=0)
    sp.add_argument("--queues", type=int, default=10, help="number of synthetic queues")
    sp.add_argument("--queue-seed", type=int, default=42)
    sp.add_argument("--queue-depth", type=int, default=9)
    sp.add_argument("--methods", default="attractor,cri,comdap")
    sp.add_argument("--seeds", type=int, nargs="+", default=[0])
    sp.add_argument("--enum-cap", type=int, default=allocators.DEFAULT_ENUM_CAP)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--tree-seed", type=int, default=0)
    sp.add_argument("--crosstalk-random", help="k=K[,kmax=K2],count=C,seed=S sweep")
    sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sp.add_argument("--out", required=True, help="report directory")
    sp.set_defaults(func=cmd_bench)
    registry["bench"] = sp

    sp = sub.add_parser("gen-backend", help="generate a synthetic calibration snapshot")
    sp.add_argument("--kind", required=True, choices=topology.TOPOLOGY_KINDS)
    sp.add_argument("--n", type=int, help="qubit count for line/ring")
    sp.add_argument("--rows", type=int)
    sp.add_argument("--cols", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cnot-lo", type=float, default=0.005)
    sp.add_argument("--cnot-hi", type=float, default=0.03)
    sp.add_argument("--readout-lo", type=float, default=0.01)
    sp.add_argument("--readout-hi", type=float, default=0.05)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_backend)
    registry["gen-backend"] = sp

    sp = sub.add_parser("gen-crosstalk", help="generate random crosstalk configurations")
    _add_backend_options(sp)
    sp.add_argument("--k", type=int, required=True, help="crosstalk-prone couples per config")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_crosstalk)
    registry["gen-crosstalk"] = sp

    return parser, registry


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()

    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path:
        try:
            config = _parse_config_file(config_path)
        except OSError as exc:
            print(f"error: cannot read config {config_path}: {exc}", file=sys.stderr)
            return EXIT_IO
        except ValidationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        for sp in registry.values():
            known = {action.dest for action in sp._actions}
            sp.set_defaults(**{k: v for k, v in config.items() if k in known})

    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (SnapshotError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, QasmError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
