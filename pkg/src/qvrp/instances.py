"""Synthetic VRPTW instances with an analytically known route family.

Customers are split into disjoint ordered groups; arcs only exist along each
group's chain plus depot connections, so depth-first enumeration recovers a
route family whose size is a closed-form function of the group sizes:

  shape="loop"     one tour per group (enter at the head, leave at the tail),
                   n_routes = number of groups; the all-ones selection is the
                   unique feasible solution.
  shape="prefix"   the depot is reachable from every chain position,
                   n_routes = sum of group sizes; the full chains form the
                   unique feasible solution.
  shape="segment"  additionally every chain position is reachable from the
                   depot, n_routes = sum of k(k+1)/2; every composition of a
                   chain into contiguous runs is feasible.

Arc costs are positive, so with the default penalty the global optimum of the
compiled quadratic program is always one of the feasible selections.
"""

from __future__ import annotations

import numpy as np

from .vrptw import Arc, Node, VrptwInstance

__all__ = [
    "partition_instance",
    "route_count",
    "plan_group_sizes",
    "instance_with_route_count",
]

SHAPES = ("loop", "prefix", "segment")


def route_count(group_sizes, shape: str) -> int:
    """Number of routes the enumerator will find for a planted instance."""
    sizes = list(group_sizes)
    if shape == "loop":
        return len(sizes)
    if shape == "prefix":
        return sum(sizes)
    if shape == "segment":
        return sum(k * (k + 1) // 2 for k in sizes)
    raise ValueError(f"unknown shape {shape!r}")


def partition_instance(
    group_sizes,
    shape: str = "segment",
    seed: int = 0,
    name: str | None = None,
) -> VrptwInstance:
    """Build a planted instance from explicit group sizes."""
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}")
    sizes = [int(k) for k in group_sizes]
    if not sizes or any(k < 1 for k in sizes):
        raise ValueError("group sizes must be positive")

    rng = np.random.default_rng(seed)
    n_customers = sum(sizes)
    labels = rng.permutation(np.arange(1, n_customers + 1)).tolist()
    groups = []
    at = 0
    for k in sizes:
        groups.append(labels[at : at + k])
        at += k

    def draw_cost():
        return float(np.round(rng.uniform(1.0, 5.0), 3))

    def draw_time():
        return float(np.round(rng.uniform(1.0, 3.0), 3))

    nodes = [Node(0)]
    arcs = {}

    def add_arc(u, v):
        if (u, v) not in arcs:
            arcs[(u, v)] = Arc(u, v, draw_cost(), draw_time())
        return arcs[(u, v)]

    for chain in groups:
        k = len(chain)
        entry_points = chain if shape == "segment" else chain[:1]
        exit_points = chain[-1:] if shape == "loop" else chain
        for c in entry_points:
            add_arc(0, c)
        for a, b in zip(chain, chain[1:]):
            add_arc(a, b)
        for c in exit_points:
            add_arc(c, 0)

        if shape == "segment":
            # Windows stay open for the latest possible arrival at each stop.
            latest = np.zeros(k)
            for j in range(k):
                t = arcs[(0, chain[j])].travel_time
                for m in range(j, k):
                    if m > j:
                        t += arcs[(chain[m - 1], chain[m])].travel_time
                    latest[m] = max(latest[m], t)
            for m, c in enumerate(chain):
                close = float(np.round(latest[m] + rng.uniform(0.5, 2.0), 3))
                nodes.append(Node(c, 0.0, close))
        else:
            # Single chain: draw opens that occasionally force waiting.
            arrival = 0.0
            prev = 0
            for c in chain:
                raw = arrival + arcs[(prev, c)].travel_time
                open_ = float(np.round(rng.uniform(0.0, 1.3 * raw), 3))
                arrival = max(open_, raw)
                close = float(np.round(arrival + rng.uniform(0.5, 2.0), 3))
                nodes.append(Node(c, open_, close))
                prev = c

    nodes.sort(key=lambda n: n.id)
    label = name or f"planted-{shape}-{seed}"
    return VrptwInstance(nodes, list(arcs.values()), name=label)


def plan_group_sizes(
    n_routes: int,
    shape: str = "segment",
    seed: int = 0,
    max_group: int = 4,
) -> list[int]:
    """Random group sizes whose planted route family has exactly n_routes members."""
    if n_routes < 1:
        raise ValueError("n_routes must be >= 1")
    rng = np.random.default_rng(seed)
    if shape == "loop":
        return [int(rng.integers(1, max_group + 1)) for _ in range(n_routes)]
    if shape == "prefix":
        sizes = []
        rem = n_routes
        while rem:
            k = int(rng.integers(1, min(max_group, rem) + 1))
            sizes.append(k)
            rem -= k
        return sizes
    if shape == "segment":
        tri = [k * (k + 1) // 2 for k in range(max_group + 1)]
        sizes = []
        rem = n_routes
        while rem:
            fits = [k for k in range(1, max_group + 1) if tri[k] <= rem]
            k = int(rng.choice(fits))
            sizes.append(k)
            rem -= tri[k]
        return sizes
    raise ValueError(f"unknown shape {shape!r}")


def instance_with_route_count(
    n_routes: int,
    shape: str = "segment",
    seed: int = 0,
    max_group: int = 4,
    name: str | None = None,
) -> VrptwInstance:
    """Planted instance whose enumeration yields exactly n_routes routes."""
    sizes = plan_group_sizes(n_routes, shape, seed, max_group)
    assert route_count(sizes, shape) == n_routes
    return partition_instance(sizes, shape, seed, name)
