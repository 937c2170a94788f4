"""File formats and report bundles. This module is the schema reference.

All formats carry a schema_version (first CSV line, key-value line, or JSON
field) and are written atomically (temp file, then rename). Numbers are
rendered with repr (shortest round-trip form), except the matrix export
which uses 17 significant digits; identical inputs therefore produce
byte-identical files.

Formats
-------
instance (.json)    {"schema_version", "name",
                     "nodes": [{"id", "open", "close" (number or "inf")}],
                     "arcs":  [{"from", "to", "cost", "time"}]}
route set (.json)   {"schema_version", "instance": name,
                     "routes": [[0, ..., 0], ...]}   loader re-validates
matrix export       line 1: "schema_version 1"; then "n_c", "penalty",
                    "offset" key-value lines; then "k l A_kl" triplets for
                    the nonzero upper triangle, %.17g
register stats      key-value preamble (schema_version, source, discarded)
                    then "k total ones p fallback" rows
report bundle dir   convergence.csv  iteration,start_id,cost,c_norm
                    cumulative.csv   source,c_norm,cdf
                    solutions.csv    start_id,sample_id,bits,cost,c_norm,feasible
                    metadata.json    config echo, bounds provenance, seeds,
                                     PRNG identity, fallback tally
                    result.json      full traces + solutions (json format only)
CSV files open with a "schema_version,1" line followed by the column header.
Costs in reports include the constant offset, so minimal- and full-encoding
numbers are directly comparable and normalize consistently.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .optimize import ExperimentResult
from .qubo import Bounds, QuboProblem
from .vrptw import Arc, Node, Route, RouteSet, VrptwInstance, validate_route

__all__ = [
    "SCHEMA_VERSION",
    "ParseError",
    "atomic_write_text",
    "write_instance",
    "load_instance",
    "write_route_set",
    "load_route_set",
    "write_qubo",
    "load_qubo",
    "write_register_stats",
    "load_register_stats",
    "bits_to_str",
    "str_to_bits",
    "cumulative_rows",
    "write_report_bundle",
]

SCHEMA_VERSION = 1


class ParseError(ValueError):
    """A file failed to parse; message carries file and line."""


def atomic_write_text(path: str, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}:{err.lineno}: {err.msg}") from err


def _check_version(doc: dict, path: str):
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"{path}:1: unsupported schema_version {doc.get('schema_version')!r}")


# -- instances ----------------------------------------------------------------

def write_instance(instance: VrptwInstance, path: str):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": instance.name,
        "nodes": [
            {
                "id": n.id,
                "open": n.window_open,
                "close": "inf" if math.isinf(n.window_close) else n.window_close,
            }
            for n in instance.nodes
        ],
        "arcs": [
            {"from": a.from_node, "to": a.to_node, "cost": a.cost, "time": a.travel_time}
            for a in instance.arcs
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_instance(path: str) -> VrptwInstance:
    doc = _load_json(path)
    _check_version(doc, path)
    try:
        nodes = [
            Node(
                id=n["id"],
                window_open=float(n["open"]),
                window_close=math.inf if n["close"] == "inf" else float(n["close"]),
            )
            for n in doc["nodes"]
        ]
        arcs = [
            Arc(
                from_node=a["from"],
                to_node=a["to"],
                cost=float(a["cost"]),
                travel_time=float(a["time"]),
            )
            for a in doc["arcs"]
        ]
        return VrptwInstance(nodes, arcs, name=doc["name"])
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"{path}: {err}") from err


# -- route sets ----------------------------------------------------------------

def write_route_set(route_set: RouteSet, path: str):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "instance": route_set.instance.name,
        "routes": [list(r.sequence) for r in route_set.routes],
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_route_set(path: str, instance: VrptwInstance) -> RouteSet:
    """Reload sequences and re-validate every route against the instance."""
    doc = _load_json(path)
    _check_version(doc, path)
    if doc.get("instance") != instance.name:
        raise ParseError(
            f"{path}: route set was built for instance {doc.get('instance')!r}, "
            f"got {instance.name!r}"
        )
    routes: list[Route] = [validate_route(instance, seq) for seq in doc["routes"]]
    return RouteSet(instance, routes)


# -- matrix export ----------------------------------------------------------------

def write_qubo(qubo: QuboProblem, path: str):
    lines = [
        f"schema_version {SCHEMA_VERSION}",
        f"n_c {qubo.n_c}",
        f"penalty {qubo.penalty:.17g}",
        f"offset {qubo.offset:.17g}",
    ]
    for k in range(qubo.n_c):
        for l in range(k, qubo.n_c):
            value = qubo.matrix[k, l]
            if value != 0.0:
                lines.append(f"{k} {l} {value:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_qubo(path: str) -> QuboProblem:
    """Rebuild the matrix form; coverage and route costs are not exported,
    so the result supports evaluation and bounds but not feasibility checks."""
    header: dict[str, float] = {}
    entries = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            try:
                if parts[0] in ("schema_version", "n_c", "penalty", "offset"):
                    header[parts[0]] = float(parts[1])
                else:
                    k, l, value = int(parts[0]), int(parts[1]), float(parts[2])
                    entries.append((k, l, value))
            except (IndexError, ValueError) as err:
                raise ParseError(f"{path}:{lineno}: {raw.rstrip()!r}") from err
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"{path}:1: unsupported schema_version")
    for key in ("n_c", "penalty", "offset"):
        if key not in header:
            raise ParseError(f"{path}: missing header key {key!r}")
    n_c = int(header["n_c"])
    matrix = np.zeros((n_c, n_c))
    for k, l, value in entries:
        matrix[k, l] = value
        matrix[l, k] = value
    return QuboProblem(
        n_c=n_c,
        matrix=matrix,
        penalty=header["penalty"],
        offset=header["offset"],
    )


# -- register statistics ----------------------------------------------------------

def write_register_stats(stats, path: str):
    lines = [
        f"schema_version {SCHEMA_VERSION}",
        f"source {stats.source}",
        f"discarded {float(stats.discarded)!r}",
        "k total ones p fallback",
    ]
    for k in range(stats.n_c):
        lines.append(
            f"{k} {float(stats.totals[k])!r} {float(stats.ones[k])!r} "
            f"{float(stats.p[k])!r} {int(stats.fallback_mask[k])}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_register_stats(path: str):
    from .encodings import RegisterStats

    meta: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts or parts == ["k", "total", "ones", "p", "fallback"]:
                continue
            if parts[0] in ("schema_version", "source", "discarded"):
                meta[parts[0]] = parts[1]
                continue
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]), bool(int(parts[4]))))
            except (IndexError, ValueError) as err:
                raise ParseError(f"{path}:{lineno}: {raw.rstrip()!r}") from err
    if meta.get("schema_version") != str(SCHEMA_VERSION):
        raise ParseError(f"{path}:1: unsupported schema_version")
    rows.sort()
    return RegisterStats(
        totals=np.array([r[1] for r in rows]),
        ones=np.array([r[2] for r in rows]),
        p=np.array([r[3] for r in rows]),
        fallback_mask=np.array([r[4] for r in rows], dtype=bool),
        discarded=float(meta["discarded"]),
        source=meta.get("source", "shots"),
    )


# -- report bundles ----------------------------------------------------------------

def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def str_to_bits(text: str) -> np.ndarray:
    return np.array([int(c) for c in text], dtype=np.int8)


def cumulative_rows(source: str, values) -> list[str]:
    """Empirical CDF rows "source,value,cdf" over sorted values."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    n = ordered.size
    return [f"{source},{float(ordered[i])!r},{(i + 1) / n!r}" for i in range(n)]


def _csv_text(header: str, rows: list[str]) -> str:
    return "\n".join([f"schema_version,{SCHEMA_VERSION}", header, *rows]) + "\n"


@dataclass(frozen=True)
class _BundlePaths:
    convergence: str
    cumulative: str
    solutions: str
    metadata: str
    result: str


def bundle_paths(out_dir: str) -> _BundlePaths:
    return _BundlePaths(
        convergence=os.path.join(out_dir, "convergence.csv"),
        cumulative=os.path.join(out_dir, "cumulative.csv"),
        solutions=os.path.join(out_dir, "solutions.csv"),
        metadata=os.path.join(out_dir, "metadata.json"),
        result=os.path.join(out_dir, "result.json"),
    )


def _bounds_doc(bounds: Bounds) -> dict:
    return {
        "c_min": bounds.c_min,
        "c_max": bounds.c_max,
        "x_min": bits_to_str(bounds.x_min),
        "x_max": bits_to_str(bounds.x_max),
        "certified": bounds.certified,
        "method": bounds.method,
    }


def _config_doc(result: ExperimentResult) -> dict:
    cfg = result.config
    return {
        "encoding": cfg.encoding,
        "layers": cfg.layers,
        "n_starts": cfg.n_starts,
        "samples_per_start": cfg.samples_per_start,
        "n_shots": "exact" if cfg.n_shots is None else cfg.n_shots,
        "max_iterations": cfg.max_iterations,
        "seed": cfg.seed,
        "gradient_mode": cfg.resolved_gradient_mode,
        "common_random_numbers": cfg.common_random_numbers,
        "adam": {
            "lr": cfg.adam.lr,
            "beta1": cfg.adam.beta1,
            "beta2": cfg.adam.beta2,
            "eps": cfg.adam.eps,
        },
    }


def write_report_bundle(
    result: ExperimentResult,
    out_dir: str,
    extra_series: dict | None = None,
    fmt: str = "csv",
    command: str = "solve",
) -> _BundlePaths:
    """Write the report files for an experiment.

    extra_series maps source labels (e.g. "all_solutions",
    "random_baseline") to normalized-cost arrays added to cumulative.csv.
    fmt "json" additionally writes result.json with full traces. Wall-clock
    timings never enter the bundle, keeping re-runs byte-identical.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = bundle_paths(out_dir)
    offset = result.offset
    bounds = result.bounds

    conv_rows = []
    for trace in result.traces:
        for it, cost in enumerate(trace.costs):
            c_norm = repr(trace.normalized_costs[it]) if trace.normalized_costs else ""
            conv_rows.append(f"{it},{trace.start_seed},{cost + offset!r},{c_norm}")
    atomic_write_text(paths.convergence, _csv_text("iteration,start_id,cost,c_norm", conv_rows))

    sol_rows = [
        f"{rec.start_id},{rec.sample_id},{bits_to_str(rec.solution.bits)},"
        f"{rec.solution.cost!r},{rec.solution.normalized_cost!r},{int(rec.solution.feasible)}"
        for rec in result.solutions
    ]
    atomic_write_text(
        paths.solutions, _csv_text("start_id,sample_id,bits,cost,c_norm,feasible", sol_rows)
    )

    cum_rows = cumulative_rows(
        "experiment", [rec.solution.normalized_cost for rec in result.solutions]
    )
    for source in sorted(extra_series or {}):
        cum_rows.extend(cumulative_rows(source, extra_series[source]))
    atomic_write_text(paths.cumulative, _csv_text("source,c_norm,cdf", cum_rows))

    fallback_total = sum(sum(t.fallback_counts) for t in result.traces)
    metadata = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _config_doc(result),
        "bounds": _bounds_doc(bounds),
        "prng": result.prng,
        "n_c": len(result.bounds.x_min),
        "offset": offset,
        "fallback": {
            "total_events": fallback_total,
            "max_per_iteration": max(
                (max(t.fallback_counts) for t in result.traces if t.fallback_counts), default=0
            ),
        },
        "best": {
            "cost": result.best_solution.solution.cost,
            "c_norm": result.best_solution.solution.normalized_cost,
            "bits": bits_to_str(result.best_solution.solution.bits),
            "feasible": result.best_solution.solution.feasible,
        },
        "feasible_fraction": result.feasible_fraction,
    }
    atomic_write_text(paths.metadata, json.dumps(metadata, indent=2, sort_keys=True) + "\n")

    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "config": _config_doc(result),
            "bounds": _bounds_doc(bounds),
            "prng": result.prng,
            "traces": [
                {
                    "start_id": t.start_seed,
                    "costs": t.costs,
                    "normalized_costs": t.normalized_costs,
                    "fallback_counts": t.fallback_counts,
                    "final_theta": list(t.final_theta),
                }
                for t in result.traces
            ],
            "solutions": [
                {
                    "start_id": rec.start_id,
                    "sample_id": rec.sample_id,
                    "bits": bits_to_str(rec.solution.bits),
                    "cost": rec.solution.cost,
                    "c_norm": rec.solution.normalized_cost,
                    "feasible": rec.solution.feasible,
                }
                for rec in result.solutions
            ],
        }
        atomic_write_text(paths.result, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return paths
