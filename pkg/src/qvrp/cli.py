"""Command-line driver: generate, qubo, brute, solve, baseline, plot.

Exit codes: 0 success; 1 input or data errors; 2 bad usage (argparse);
3 a solve run that sampled no feasible solution.

Every command is deterministic for a fixed --seed (and exact mode where
sampling is involved): re-runs produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import serialize
from .encodings import qubits_required
from .instances import SHAPES, instance_with_route_count
from .optimize import RunConfig, run_experiment
from .qubo import (
    DegenerateRange,
    brute_force,
    build_qubo,
    ensure_bounds,
    evaluate_many,
    indices_to_bits,
    normalize_cost,
)
from .simulator import make_rng, prng_metadata
from .vrptw import GenerateConfig, NoFeasibleRoutes, RouteError, generate_routes

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_FEASIBLE = 3

ALL_SOLUTIONS_CAP = 20  # enumerate the full spectrum into cumulative.csv up to here


def _cmd_generate(args) -> int:
    if args.instance_file == "planted":
        instance = instance_with_route_count(
            args.planted_routes, shape=args.planted_shape, seed=args.seed
        )
        if args.write_instance:
            serialize.write_instance(instance, args.write_instance)
    else:
        instance = serialize.load_instance(args.instance_file)
    config = GenerateConfig(
        max_stops=args.max_stops if args.max_stops else instance.n_customers,
        max_routes=args.max_routes,
        seed=args.seed,
    )
    route_set = generate_routes(instance, config)
    serialize.write_route_set(route_set, args.out)
    covered = sorted({c for r in route_set.routes for c in r.coverage})
    print(f"instance {instance.name}: {route_set.n_c} routes")
    print(f"customers covered: {len(covered)} of {instance.n_customers}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _load_problem(args):
    instance = serialize.load_instance(args.instance)
    route_set = serialize.load_route_set(args.route_set, instance)
    return build_qubo(
        route_set,
        penalty=getattr(args, "penalty", None),
        vehicle_count=getattr(args, "vehicles", None),
    )


def _cmd_qubo(args) -> int:
    problem = _load_problem(args)
    serialize.write_qubo(problem, args.out)
    print(f"n_c={problem.n_c} penalty={problem.penalty!r} offset={problem.offset!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_brute(args) -> int:
    problem = serialize.load_qubo(args.qubo_file)
    bounds = brute_force(problem, cap=args.cap)
    doc = {
        "schema_version": serialize.SCHEMA_VERSION,
        "c_min": bounds.c_min,
        "c_max": bounds.c_max,
        "x_min": serialize.bits_to_str(bounds.x_min),
        "x_max": serialize.bits_to_str(bounds.x_max),
        "certified": bounds.certified,
        "method": bounds.method,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        serialize.atomic_write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_solve(args) -> int:
    problem = _load_problem(args)
    ensure_bounds(problem, seed=args.seed)
    config = RunConfig(
        encoding=args.encoding,
        layers=args.layers,
        n_starts=args.starts,
        samples_per_start=args.samples,
        n_shots=args.shots,
        max_iterations=args.iters,
        seed=args.seed,
        gradient_mode=args.gradient_mode,
    )
    result = run_experiment(problem, config, threads=args.threads)

    extra = {}
    if problem.n_c <= ALL_SOLUTIONS_CAP:
        bits = indices_to_bits(np.arange(1 << problem.n_c), problem.n_c)
        costs = evaluate_many(problem, bits, include_offset=True)
        extra["all_solutions"] = [
            normalize_cost(c, problem.bounds.c_min, problem.bounds.c_max) for c in costs
        ]
    if args.baseline_samples > 0:
        rng = make_rng(args.seed, 4)
        rand_bits = rng.integers(0, 2, size=(args.baseline_samples, problem.n_c))
        costs = evaluate_many(problem, rand_bits, include_offset=True)
        extra["random_baseline"] = [
            normalize_cost(c, problem.bounds.c_min, problem.bounds.c_max) for c in costs
        ]

    paths = serialize.write_report_bundle(
        result, args.out, extra_series=extra, fmt=args.format, command="solve"
    )
    best = result.best_solution.solution
    n_q = qubits_required(problem.n_c, args.encoding)
    flag = "certified" if problem.bounds.certified else "estimated"
    print(f"n_c={problem.n_c} n_q={n_q} encoding={args.encoding} bounds={flag}")
    print(f"best cost {best.cost!r} (c_norm {best.normalized_cost!r}) feasible={best.feasible}")
    print(f"feasible fraction {result.feasible_fraction:.3f} over {len(result.solutions)} samples")
    print(f"wrote {os.path.dirname(paths.metadata) or paths.metadata}")
    if not any(rec.solution.feasible for rec in result.solutions):
        print("no feasible solution sampled", file=sys.stderr)
        return EXIT_NO_FEASIBLE
    return EXIT_OK


def _cmd_baseline(args) -> int:
    problem = serialize.load_qubo(args.qubo_file)
    ensure_bounds(problem, seed=args.seed)
    rng = make_rng(args.seed, 4)
    bits = rng.integers(0, 2, size=(args.samples, problem.n_c))
    costs = evaluate_many(problem, bits, include_offset=True)
    values = [normalize_cost(c, problem.bounds.c_min, problem.bounds.c_max) for c in costs]
    rows = serialize.cumulative_rows("random_baseline", values)
    text = "\n".join([f"schema_version,{serialize.SCHEMA_VERSION}", "source,c_norm,cdf", *rows]) + "\n"
    serialize.atomic_write_text(args.out, text)
    print(f"wrote {args.out}")
    return EXIT_OK


def _read_csv(path: str) -> list[list[str]]:
    if not os.path.exists(path):
        raise serialize.ParseError(f"{path}: missing report file")
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if len(lines) < 2 or not lines[0].startswith("schema_version"):
        raise serialize.ParseError(f"{path}:1: not a report csv")
    rows = [line.split(",") for line in lines[2:]]
    if not rows:
        raise serialize.ParseError(f"{path}: no data rows")
    return rows


def _cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "qvrp"
    import matplotlib.pyplot as plt

    paths = serialize.bundle_paths(args.report_dir)
    convergence = _read_csv(paths.convergence)
    cumulative = _read_csv(paths.cumulative)
    solutions = _read_csv(paths.solutions)
    os.makedirs(args.out, exist_ok=True)

    def save(fig, name):
        target = os.path.join(args.out, name)
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        print(f"wrote {target}")

    by_start: dict[str, list[tuple[int, float]]] = {}
    for it, start, cost, c_norm in convergence:
        by_start.setdefault(start, []).append((int(it), float(c_norm or cost)))
    fig, ax = plt.subplots(figsize=(6, 4))
    for start in sorted(by_start, key=int):
        pairs = sorted(by_start[start])
        ax.plot([p[0] for p in pairs], [p[1] for p in pairs], lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("normalized cost")
    ax.set_title("convergence per start")
    save(fig, "convergence.svg")

    by_source: dict[str, list[tuple[float, float]]] = {}
    for source, value, cdf in cumulative:
        by_source.setdefault(source, []).append((float(value), float(cdf)))
    fig, ax = plt.subplots(figsize=(6, 4))
    for source in sorted(by_source):
        pairs = sorted(by_source[source])
        ax.step([p[0] for p in pairs], [p[1] for p in pairs], where="post", label=source)
    ax.set_xlabel("normalized cost")
    ax.set_ylabel("cumulative fraction")
    ax.legend()
    ax.set_title("solution quality distribution")
    save(fig, "cumulative.svg")

    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [int(row[0]) for row in solutions]
    ys = [float(row[4]) for row in solutions]
    feas = [row[5] == "1" for row in solutions]
    ax.scatter(
        [x for x, f in zip(xs, feas) if f],
        [y for y, f in zip(ys, feas) if f],
        marker="*",
        label="feasible",
    )
    ax.scatter(
        [x for x, f in zip(xs, feas) if not f],
        [y for y, f in zip(ys, feas) if not f],
        marker="^",
        label="infeasible",
    )
    ax.set_xlabel("start")
    ax.set_ylabel("normalized cost")
    ax.legend()
    ax.set_title("sampled solutions per start")
    save(fig, "solutions.svg")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qvrp", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for multistart")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="csv bundle only, or additionally result.json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="enumerate routes from an instance file")
    p.add_argument("instance_file",
                   help="instance json, or the literal 'planted' to synthesize one")
    p.add_argument("-o", "--out", required=True, help="route-set json to write")
    p.add_argument("--max-stops", type=int, default=None)
    p.add_argument("--max-routes", type=int, default=None)
    p.add_argument("--planted-routes", type=int, default=11,
                   help="route count when synthesizing (instance_file='planted')")
    p.add_argument("--planted-shape", choices=SHAPES, default="segment")
    p.add_argument("--write-instance", default=None,
                   help="also write the synthesized instance json here")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("qubo", help="compile a route set into a matrix export")
    p.add_argument("route_set")
    p.add_argument("--instance", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--penalty", type=float, default=None)
    p.add_argument("--vehicles", type=int, default=None)
    p.set_defaults(func=_cmd_qubo)

    p = sub.add_parser("brute", help="certified cost bounds by exhaustive scan")
    p.add_argument("qubo_file")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--cap", type=int, default=26)
    p.set_defaults(func=_cmd_brute)

    p = sub.add_parser("solve", help="variational optimization and report bundle")
    p.add_argument("route_set")
    p.add_argument("--instance", required=True)
    p.add_argument("-o", "--out", required=True, help="report directory")
    p.add_argument("--encoding", choices=("minimal", "full"), default="minimal")
    p.add_argument("--shots", default="exact",
                   help="shots per evaluation, or 'exact' (default)")
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--samples", type=int, default=10, help="solutions sampled per start")
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--gradient-mode", choices=("chain_rule", "naive_shift"), default=None)
    p.add_argument("--baseline-samples", type=int, default=20000,
                   help="random bitstrings for the baseline series (0 disables)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("baseline", help="cumulative curve of random bitstrings")
    p.add_argument("qubo_file")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--samples", type=int, default=100000)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("plot", help="render a report bundle to svg")
    p.add_argument("report_dir")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve" and args.shots != "exact":
        args.shots = int(args.shots)
    try:
        return args.func(args)
    except (serialize.ParseError, RouteError, NoFeasibleRoutes, DegenerateRange,
            ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
