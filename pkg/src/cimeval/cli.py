"""Command line interface.

Subcommands: evaluate, search, sweep, oracle-compare, validate.

Exit codes: 0 success, 2 invalid input (parse or validation failure),
3 empty mapping space (search found no valid mapping), 4 oracle mismatch.

Reports are deterministic: JSON with sorted keys and no timestamps, CSV
with LF line endings and a schema comment; the worker count never appears
in a report, so reruns and --jobs variations are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .archspec import ArchError, ArchTree, SpatialSpec, parse_arch, validate
from .components import ComponentError
from .engine import (
    EngineError,
    LayerEvaluator,
    evaluate as engine_evaluate,
    oracle_evaluate,
    search as engine_search,
)
from .mapping import (
    MapperConfig,
    Mapping,
    MappingError,
    check_valid,
    parse_mapping,
    serialize_mapping,
)
from .valuemodel import ValueModelError
from .workload import WorkloadError, WorkloadLayer, parse_workload

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_MISMATCH = 4

JOBS_ENV = "CIM_MODEL_JOBS"

_INPUT_ERRORS = (
    ArchError,
    WorkloadError,
    MappingError,
    ComponentError,
    ValueModelError,
    EngineError,
    OSError,
)


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _input_entry(path: str) -> dict:
    p = Path(path)
    return {"path": str(path), "sha256": _sha256(p)}


def _load_arch(path: str) -> ArchTree:
    tree = parse_arch(Path(path).read_text(encoding="utf-8"))
    errors = validate(tree)
    if errors:
        raise _CliError(
            "architecture validation failed:\n  " + "\n  ".join(errors)
        )
    return tree


def _load_layers(path: str, layer_name: str | None) -> list[WorkloadLayer]:
    layers = parse_workload(
        Path(path).read_text(encoding="utf-8"), base_dir=Path(path).parent
    )
    if layer_name is None:
        return layers
    for layer in layers:
        if layer.name == layer_name:
            return [layer]
    known = ", ".join(l.name for l in layers)
    raise _CliError(f"workload has no layer {layer_name!r} (layers: {known})")


def _load_mapping(path: str) -> Mapping:
    return parse_mapping(Path(path).read_text(encoding="utf-8"))


def _mapping_doc(mapping: Mapping) -> dict:
    return {
        node: [{"dim": l.dim, "bound": l.bound, "kind": l.kind} for l in loops]
        for node, loops in mapping.loops
    }


def _counts_doc(counts: dict) -> dict:
    doc: dict = {}
    for (node, tensor, action), c in sorted(counts.items()):
        doc.setdefault(node, {}).setdefault(tensor, {})[action] = c
    return doc


def _metrics_doc(res) -> dict:
    return {
        "energy_j": res.energy_j,
        "energy_per_mac_j": res.energy_per_mac_j,
        "cycles": res.cycles,
        "latency_s": res.latency_s,
        "utilization": res.utilization,
        "area_m2": res.area_m2,
        "edp_js": res.edp_js,
        "macs": res.macs,
    }


def _breakdown_doc(breakdown: dict) -> dict:
    doc: dict = {}
    for (node, action), (count, unit, energy) in sorted(breakdown.items()):
        doc.setdefault(node, {})[action] = {
            "count": count,
            "unit_j": unit,
            "energy_j": energy,
        }
    return doc


def _emit_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _jobs_default() -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise _CliError(f"{JOBS_ENV} must be an integer, got {env!r}")
    return 1


def _select_one_layer(layers: list[WorkloadLayer], why: str) -> WorkloadLayer:
    if len(layers) != 1:
        names = ", ".join(l.name for l in layers)
        raise _CliError(f"{why} needs --layer to pick one of: {names}")
    return layers[0]


def _cmd_evaluate(args) -> int:
    arch = _load_arch(args.arch)
    layers = _load_layers(args.workload, args.layer)
    layer = _select_one_layer(layers, "evaluate")
    mapping = _load_mapping(args.mapping)
    arch_errors = validate(arch, layer)
    if arch_errors:
        raise _CliError(
            "architecture validation failed:\n  " + "\n  ".join(arch_errors)
        )
    diag = check_valid(arch, layer, mapping)
    if not diag.ok:
        raise _CliError("invalid mapping:\n  " + "\n  ".join(diag.errors))
    evaluator = LayerEvaluator(arch, layer)
    res = evaluator.evaluate(mapping)
    report = {
        "command": "evaluate",
        "version": __version__,
        "inputs": {
            "arch": _input_entry(args.arch),
            "workload": _input_entry(args.workload),
            "mapping": _input_entry(args.mapping),
        },
        "layer": layer.name,
        "mapping": _mapping_doc(mapping),
        "metrics": _metrics_doc(res),
        "counts": _counts_doc(res.counts),
        "breakdown": _breakdown_doc(res.breakdown),
        "energy_table_fingerprint": evaluator.table.fingerprint,
        "diagnostics": {"warnings": diag.warnings},
    }
    _emit_report(report, args.out)
    return EXIT_OK


def _cmd_search(args) -> int:
    arch = _load_arch(args.arch)
    layers = _load_layers(args.workload, args.layer)
    if args.dump_mapping and len(layers) != 1:
        raise _CliError("--dump-mapping needs --layer with multi-layer workloads")
    config = MapperConfig(
        objective=args.objective,
        budget=args.budget,
        seed=args.seed,
        jobs=args.jobs,
    )
    per_layer: dict = {}
    totals = {"energy_j": 0.0, "latency_s": 0.0, "macs": 0}
    area = None
    for layer in layers:
        arch_errors = validate(arch, layer)
        if arch_errors:
            raise _CliError(
                "architecture validation failed:\n  " + "\n  ".join(arch_errors)
            )
        found = engine_search(arch, layer, config)
        if found is None:
            sys.stderr.write(
                f"error: no valid mapping for layer {layer.name!r} "
                f"within budget {args.budget}\n"
            )
            return EXIT_EMPTY
        res = found.result
        per_layer[layer.name] = {
            "best_index": found.index,
            "best_mapping": _mapping_doc(found.mapping),
            "metrics": _metrics_doc(res),
            "evaluated": found.evaluated,
            "valid": found.valid,
            "space_total": found.space_total,
            "energy_table_fingerprint": found.fingerprint,
        }
        totals["energy_j"] += res.energy_j
        totals["latency_s"] += res.latency_s
        totals["macs"] += res.macs
        area = res.area_m2
        if args.dump_mapping:
            Path(args.dump_mapping).write_text(
                serialize_mapping(found.mapping), encoding="utf-8", newline="\n"
            )
    totals["area_m2"] = area
    totals["edp_js"] = totals["energy_j"] * totals["latency_s"]
    report = {
        "command": "search",
        "version": __version__,
        "inputs": {
            "arch": _input_entry(args.arch),
            "workload": _input_entry(args.workload),
        },
        "objective": args.objective,
        "budget": args.budget,
        "seed": args.seed,
        "layers": per_layer,
        "totals": totals,
    }
    _emit_report(report, args.out)
    return EXIT_OK


def _parse_param(spec: str) -> tuple[str, list]:
    if "=" not in spec:
        raise _CliError(f"--param must look like node.attr=v1,v2,... got {spec!r}")
    path, _, raw = spec.partition("=")
    path = path.strip()
    if "." not in path:
        raise _CliError(f"--param path must be node.attr, got {path!r}")
    values = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            values.append(int(tok))
        except ValueError:
            try:
                values.append(float(tok))
            except ValueError:
                raise _CliError(f"--param value {tok!r} is not a number")
    if not values:
        raise _CliError(f"--param {path} has no values")
    return path, values


def _apply_param(arch: ArchTree, path: str, value) -> ArchTree:
    node_name, _, attr = path.partition(".")
    nodes = []
    hit = False
    for node in arch.nodes:
        if node.name != node_name:
            nodes.append(node)
            continue
        hit = True
        if attr in ("mesh_x", "mesh_y"):
            spatial = dataclasses.replace(node.spatial, **{attr: int(value)})
            nodes.append(dataclasses.replace(node, spatial=spatial))
        else:
            attrs = dict(node.attributes)
            attrs[attr] = value
            nodes.append(dataclasses.replace(node, attributes=attrs))
    if not hit:
        raise _CliError(f"sweep parameter names unknown node {node_name!r}")
    return ArchTree(tuple(nodes))


def _cmd_sweep(args) -> int:
    arch = _load_arch(args.arch)
    layers = _load_layers(args.workload, args.layer)
    params = [_parse_param(spec) for spec in args.param]
    if not params:
        raise _CliError("sweep needs at least one --param")
    n_points = len(params[0][1])
    for path, values in params:
        if len(values) != n_points:
            raise _CliError(
                "zipped --param lists must have equal lengths; "
                f"{path} has {len(values)}, expected {n_points}"
            )
    config = MapperConfig(
        objective=args.objective,
        budget=args.budget,
        seed=args.seed,
        jobs=args.jobs,
    )
    paths = [path for path, _ in params]
    columns = (
        ["layer"]
        + paths
        + ["best_energy_j", "energy_per_mac_j", "cycles", "utilization", "area_m2"]
    )
    buf = io.StringIO()
    buf.write("# cimeval-sweep-v1 " + ",".join(columns) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for k in range(n_points):
        point = arch
        for path, values in params:
            point = _apply_param(point, path, values[k])
        point_errors = validate(point)
        if point_errors:
            raise _CliError(
                f"sweep point {k} invalid:\n  " + "\n  ".join(point_errors)
            )
        for layer in layers:
            found = engine_search(point, layer, config)
            if found is None:
                sys.stderr.write(
                    f"error: no valid mapping at sweep point {k} "
                    f"for layer {layer.name!r}\n"
                )
                return EXIT_EMPTY
            res = found.result
            writer.writerow(
                [layer.name]
                + [repr(values[k]) for _, values in params]
                + [
                    repr(res.energy_j),
                    repr(res.energy_per_mac_j),
                    str(res.cycles),
                    repr(res.utilization),
                    repr(res.area_m2),
                ]
            )
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_oracle_compare(args) -> int:
    arch = _load_arch(args.arch)
    layers = _load_layers(args.workload, args.layer)
    layer = _select_one_layer(layers, "oracle-compare")
    mapping = _load_mapping(args.mapping)
    res = engine_evaluate(arch, layer, mapping)
    oracle = oracle_evaluate(arch, layer, mapping, seed=args.seed)

    keys = sorted(set(res.counts) | set(oracle.counts))
    mismatches = []
    lines = []
    for key in keys:
        a = res.counts.get(key, 0)
        b = oracle.counts.get(key, 0)
        ok = a == b
        if not ok:
            mismatches.append(key)
        node, tensor, action = key
        lines.append(
            f"{'ok      ' if ok else 'MISMATCH'} {node}.{tensor}.{action}: "
            f"model={a} oracle={b}"
        )
    gap = abs(res.energy_j - oracle.energy_j) / res.energy_j if res.energy_j else 0.0
    lines.append(
        f"energy: model={res.energy_j!r} J oracle={oracle.energy_j!r} J "
        f"relative_gap={gap:.3e}"
    )
    energy_fail = args.energy_tol is not None and gap > args.energy_tol
    verdict = "match" if not mismatches and not energy_fail else "mismatch"
    lines.append(f"verdict: {verdict}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        report = {
            "command": "oracle-compare",
            "version": __version__,
            "inputs": {
                "arch": _input_entry(args.arch),
                "workload": _input_entry(args.workload),
                "mapping": _input_entry(args.mapping),
            },
            "layer": layer.name,
            "seed": args.seed,
            "counts_model": _counts_doc(res.counts),
            "counts_oracle": _counts_doc(oracle.counts),
            "energy_model_j": res.energy_j,
            "energy_oracle_j": oracle.energy_j,
            "energy_relative_gap": gap,
            "verdict": verdict,
        }
        _emit_report(report, args.out)
    return EXIT_OK if verdict == "match" else EXIT_MISMATCH


def _cmd_validate(args) -> int:
    problems: list[str] = []
    warnings: list[str] = []
    arch = parse_arch(Path(args.arch).read_text(encoding="utf-8"))
    layers: list[WorkloadLayer] = []
    if args.workload:
        layers = _load_layers(args.workload, args.layer)
    if layers:
        for layer in layers:
            problems += [
                f"[{layer.name}] {e}" for e in validate(arch, layer)
            ]
    else:
        problems += validate(arch)
    if args.mapping:
        if not layers:
            raise _CliError("validating a mapping needs --workload")
        mapping = _load_mapping(args.mapping)
        for layer in layers:
            diag = check_valid(arch, layer, mapping)
            problems += [f"[{layer.name}] {e}" for e in diag.errors]
            warnings += [f"[{layer.name}] {w}" for w in diag.warnings]
    for w in warnings:
        sys.stdout.write(f"warning: {w}\n")
    if problems:
        for p in problems:
            sys.stdout.write(f"error: {p}\n")
        return EXIT_INPUT
    sys.stdout.write("ok\n")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimeval",
        description="Statistical energy/area/latency model for "
        "compute-in-memory accelerators",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common_io(p, mapping=False):
        p.add_argument("--arch", required=True, help="architecture YAML")
        p.add_argument("--workload", required=True, help="workload YAML")
        if mapping:
            p.add_argument("--mapping", required=True, help="mapping YAML")
        p.add_argument("--layer", help="restrict to one layer")
        p.add_argument("--out", help="write the report here instead of stdout")

    def common_search(p):
        p.add_argument(
            "--objective",
            choices=("energy", "latency", "edp"),
            default="energy",
        )
        p.add_argument("--budget", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument(
            "--jobs",
            type=int,
            default=_jobs_default(),
            help=f"worker processes (default ${JOBS_ENV} or 1)",
        )

    p = sub.add_parser("evaluate", help="evaluate one mapping")
    common_io(p, mapping=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("search", help="search the mapping space")
    common_io(p)
    common_search(p)
    p.add_argument("--dump-mapping", help="write the best mapping YAML here")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("sweep", help="sweep architecture parameters")
    common_io(p)
    common_search(p)
    p.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NODE.ATTR=V1,V2,...",
        help="repeatable; multiple params zip into coupled sweep points",
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "oracle-compare", help="check the model against the brute-force oracle"
    )
    common_io(p, mapping=True)
    p.add_argument("--seed", type=int, default=0, help="tensor draw seed")
    p.add_argument(
        "--energy-tol",
        type=float,
        default=None,
        help="also fail when the relative energy gap exceeds this",
    )
    p.set_defaults(func=_cmd_oracle_compare)

    p = sub.add_parser("validate", help="validate inputs without evaluating")
    p.add_argument("--arch", required=True)
    p.add_argument("--workload")
    p.add_argument("--mapping")
    p.add_argument("--layer")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as e:
        sys.stderr.write(f"error: {e}\n")
        return e.code
    except _INPUT_ERRORS as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
