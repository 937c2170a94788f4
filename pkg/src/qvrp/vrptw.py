"""Vehicle routing with time windows: instances, route validation, enumeration.

A problem instance is a directed graph of nodes with service windows. Node 0
is the depot and has an unbounded window. Routes start and end at the depot,
visit each customer at most once, and must respect every window along the
way; a vehicle arriving early waits until the window opens.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

__all__ = [
    "Node",
    "Arc",
    "VrptwInstance",
    "Route",
    "RouteSet",
    "GenerateConfig",
    "RouteError",
    "BadEndpoints",
    "MissingArc",
    "DuplicateNode",
    "WindowViolation",
    "NoFeasibleRoutes",
    "validate_route",
    "route_cost",
    "max_routes",
    "generate_routes",
]

DEPOT = 0


class RouteError(ValueError):
    """A proposed route violates the instance's constraints."""


class BadEndpoints(RouteError):
    def __init__(self, sequence):
        super().__init__(f"route must start and end at the depot, got {list(sequence)}")


class MissingArc(RouteError):
    def __init__(self, position: int, from_node: int, to_node: int):
        self.position = position
        super().__init__(f"no arc ({from_node}, {to_node}) at segment {position}")


class DuplicateNode(RouteError):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"customer {node} appears more than once")


class WindowViolation(RouteError):
    def __init__(self, position: int, arrival: float, close: float):
        self.position = position
        self.arrival = arrival
        self.close = close
        super().__init__(
            f"arrival {arrival} at position {position} exceeds window close {close}"
        )


class NoFeasibleRoutes(RuntimeError):
    """Route enumeration produced nothing."""


@dataclass(frozen=True)
class Node:
    """A location with a service window [window_open, window_close].

    The depot (id 0) must have the sentinel unbounded window [0, inf).
    """

    id: int
    window_open: float = 0.0
    window_close: float = math.inf

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"node id must be >= 0, got {self.id}")
        if self.window_open < 0:
            raise ValueError(f"window_open must be >= 0, got {self.window_open}")
        if self.window_close < self.window_open:
            raise ValueError(
                f"invalid window [{self.window_open}, {self.window_close}]"
            )


@dataclass(frozen=True)
class Arc:
    """Directed connection with a travel cost and a travel time."""

    from_node: int
    to_node: int
    cost: float
    travel_time: float = 0.0

    def __post_init__(self):
        if self.travel_time < 0:
            raise ValueError(f"travel_time must be >= 0, got {self.travel_time}")
        # Self-loops are meaningless except the degenerate depot loop.
        if self.from_node == self.to_node and self.from_node != DEPOT:
            raise ValueError(f"self-loop at customer {self.from_node}")


@dataclass
class VrptwInstance:
    """Immutable network of nodes and directed arcs; node 0 is the depot."""

    nodes: list[Node]
    arcs: list[Arc]
    name: str = "instance"
    _arc_map: dict[tuple[int, int], Arc] = field(init=False, repr=False)
    _adjacency: dict[int, list[Arc]] = field(init=False, repr=False)
    _nodes_by_id: dict[int, Node] = field(init=False, repr=False)

    def __post_init__(self):
        ids = sorted(n.id for n in self.nodes)
        if ids != list(range(len(self.nodes))):
            raise ValueError("node ids must be contiguous 0..N")
        self._nodes_by_id = {n.id: n for n in self.nodes}
        depot = next(n for n in self.nodes if n.id == DEPOT)
        if depot.window_open != 0 or not math.isinf(depot.window_close):
            raise ValueError("depot window must be [0, inf)")
        self._arc_map = {}
        for arc in self.arcs:
            for end in (arc.from_node, arc.to_node):
                if not 0 <= end < len(self.nodes):
                    raise ValueError(f"arc endpoint {end} is not a node")
            key = (arc.from_node, arc.to_node)
            if key in self._arc_map:
                raise ValueError(f"duplicate arc {key}")
            self._arc_map[key] = arc
        # Greedy enumeration order: cheapest arc first, destination id breaks ties.
        self._adjacency = {n.id: [] for n in self.nodes}
        for arc in sorted(self.arcs, key=lambda a: (a.cost, a.to_node)):
            self._adjacency[arc.from_node].append(arc)

    @property
    def n_customers(self) -> int:
        return len(self.nodes) - 1

    def node(self, node_id: int) -> Node:
        return self._nodes_by_id[node_id]

    @property
    def nodes_by_id(self) -> dict[int, Node]:
        return self._nodes_by_id

    def arc(self, from_node: int, to_node: int) -> Arc | None:
        return self._arc_map.get((from_node, to_node))

    def outgoing(self, node_id: int) -> list[Arc]:
        return self._adjacency[node_id]


@dataclass(frozen=True)
class Route:
    """A validated depot-to-depot tour.

    coverage holds the customer ids visited; arrival_times[p] is the
    effective service time at sequence[p].
    """

    sequence: tuple[int, ...]
    cost: float
    coverage: frozenset[int]
    arrival_times: tuple[float, ...]

    @property
    def n_stops(self) -> int:
        return len(self.coverage)


@dataclass
class RouteSet:
    """The candidate routes a solver chooses among; n_c is the variable count."""

    instance: VrptwInstance
    routes: list[Route]

    def __post_init__(self):
        for route in self.routes:
            if not route.coverage:
                raise ValueError(f"route {route.sequence} covers no customer")

    @property
    def n_c(self) -> int:
        return len(self.routes)

    def coverage_counts(self, selected) -> dict[int, int]:
        """Visits per customer id for a 0/1 selection vector over routes."""
        counts = {i: 0 for i in range(1, len(self.instance.nodes))}
        for route, x in zip(self.routes, selected):
            if x:
                for node in route.coverage:
                    counts[node] += 1
        return counts


def validate_route(instance: VrptwInstance, sequence) -> Route:
    """Check a node sequence against the instance and return the Route.

    Arrival times follow the waiting recurrence
    T_next = max(window_open_next, T_current + travel_time); the route is
    rejected if any arrival exceeds a window close, a segment has no arc,
    the endpoints are not the depot, or a customer repeats.
    """
    seq = tuple(sequence)
    if not seq:
        raise RouteError("empty sequence")
    if seq[0] != DEPOT or seq[-1] != DEPOT:
        raise BadEndpoints(seq)
    seen = set()
    for node in seq[1:-1]:
        if node == DEPOT:
            continue
        if node in seen:
            raise DuplicateNode(node)
        seen.add(node)

    nodes = instance.nodes_by_id
    arrivals = [0.0]
    cost = 0.0
    for p in range(len(seq) - 1):
        arc = instance.arc(seq[p], seq[p + 1])
        if arc is None:
            raise MissingArc(p, seq[p], seq[p + 1])
        cost += arc.cost
        nxt = nodes[seq[p + 1]]
        arrival = max(nxt.window_open, arrivals[-1] + arc.travel_time)
        if arrival > nxt.window_close:
            raise WindowViolation(p + 1, arrival, nxt.window_close)
        arrivals.append(arrival)
    return Route(seq, cost, frozenset(seen), tuple(arrivals))


def route_cost(instance: VrptwInstance, sequence) -> float:
    """Sum of arc costs along the sequence."""
    seq = tuple(sequence)
    total = 0.0
    for p in range(len(seq) - 1):
        arc = instance.arc(seq[p], seq[p + 1])
        if arc is None:
            raise MissingArc(p, seq[p], seq[p + 1])
        total += arc.cost
    return total


def max_routes(n_customers: int) -> int:
    """Count of distinct depot-to-depot tours on a complete N-customer graph.

    Exact integer: sum over tour lengths i of N!/(N-i)!.
    """
    if n_customers < 0:
        raise ValueError("customer count must be >= 0")
    return sum(math.perm(n_customers, i) for i in range(1, n_customers + 1))


@dataclass(frozen=True)
class GenerateConfig:
    """Enumeration limits for generate_routes.

    max_routes None means unlimited. The enumeration itself is
    order-deterministic; seed is carried only as provenance for reports.
    """

    max_stops: int
    max_routes: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.max_stops < 1:
            raise ValueError("max_stops must be >= 1")
        if self.max_routes is not None and self.max_routes < 1:
            raise ValueError("max_routes must be >= 1 or None")


def generate_routes(instance: VrptwInstance, config: GenerateConfig) -> RouteSet:
    """Enumerate feasible routes depth-first and return the first max_routes.

    From each node, arcs are tried cheapest-first (ties by destination id).
    An arc back to the depot closes and emits the current route; other arcs
    extend it, pruning on window violations, repeat visits, and the
    max_stops cap. The emission order is deterministic, so a larger
    max_routes yields a superset prefix-wise.
    """
    nodes = instance.nodes_by_id

    def walk(node, arrival, visited, seq, arrivals, cost):
        for arc in instance.outgoing(node):
            nxt = arc.to_node
            if nxt == DEPOT:
                if len(seq) > 1:  # skip the empty depot loop
                    yield Route(
                        tuple(seq) + (DEPOT,),
                        cost + arc.cost,
                        frozenset(visited),
                        tuple(arrivals) + (arrival + arc.travel_time,),
                    )
                continue
            if nxt in visited or len(visited) >= config.max_stops:
                continue
            t = max(nodes[nxt].window_open, arrival + arc.travel_time)
            if t > nodes[nxt].window_close:
                continue
            seq.append(nxt)
            arrivals.append(t)
            visited.add(nxt)
            yield from walk(nxt, t, visited, seq, arrivals, cost + arc.cost)
            visited.discard(nxt)
            arrivals.pop()
            seq.pop()

    gen = walk(DEPOT, 0.0, set(), [DEPOT], [0.0], 0.0)
    routes = list(itertools.islice(gen, config.max_routes))
    if not routes:
        raise NoFeasibleRoutes(f"no feasible route in instance {instance.name!r}")
    return RouteSet(instance, routes)
