"""Route selection as quadratic unconstrained binary optimization.

Selecting route r is the binary variable x_r. Coverage constraints (every
customer exactly once, optionally a fixed vehicle count) enter as quadratic
penalties with coefficient rho, giving a symmetric matrix A and a constant
offset such that  x^T A x + offset  is the fully penalized cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vrptw import RouteSet

__all__ = [
    "QuboProblem",
    "EvaluatedSolution",
    "IsingView",
    "Bounds",
    "AnnealSchedule",
    "LengthMismatch",
    "EmptyRouteSet",
    "TooLarge",
    "DegenerateRange",
    "default_penalty",
    "build_qubo",
    "evaluate",
    "evaluate_many",
    "check_feasibility",
    "brute_force",
    "anneal_bounds",
    "ensure_bounds",
    "normalize_cost",
    "to_ising",
    "ising_energy",
    "indices_to_bits",
    "bits_to_index",
]


class LengthMismatch(ValueError):
    pass


class EmptyRouteSet(ValueError):
    pass


class TooLarge(ValueError):
    def __init__(self, n_c: int, cap: int):
        super().__init__(f"brute force over 2^{n_c} states exceeds cap 2^{cap}")


class DegenerateRange(ValueError):
    pass


def indices_to_bits(indices, n_bits: int) -> np.ndarray:
    """Decode basis indices to bit rows; bit k of the index is variable k."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 1)
    return ((idx >> np.arange(n_bits)) & 1).astype(np.float64)

def bits_to_index(bits) -> int:
    b = np.asarray(bits, dtype=np.int64)
    return int((b << np.arange(b.size)).sum())


@dataclass(frozen=True)
class Bounds:
    """Extremes of the penalized cost, used to rescale costs into [0, 1]."""

    c_min: float
    c_max: float
    x_min: np.ndarray
    x_max: np.ndarray
    certified: bool
    method: str


@dataclass
class QuboProblem:
    """Symmetric matrix A with offset; x^T A x + offset is the penalized cost.

    route_costs and coverage are retained for feasibility checks; problems
    reloaded from a bare matrix export carry None there. bounds is attached
    lazily (see ensure_bounds).
    """

    n_c: int
    matrix: np.ndarray
    penalty: float
    offset: float
    node_count: int | None = None
    route_costs: np.ndarray | None = None
    coverage: np.ndarray | None = None
    vehicle_count: int | None = None
    bounds: Bounds | None = field(default=None, compare=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape != (self.n_c, self.n_c):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({self.n_c}, {self.n_c})")
        if not np.array_equal(self.matrix, self.matrix.T):
            raise ValueError("matrix must be exactly symmetric")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")
        if self.penalty <= 0:
            raise ValueError("penalty must be > 0")


@dataclass(frozen=True)
class EvaluatedSolution:
    """A bitstring with its penalized cost and constraint diagnostics."""

    bits: np.ndarray
    cost: float
    normalized_cost: float | None
    visit_counts: np.ndarray
    feasible: bool


@dataclass(frozen=True)
class IsingView:
    """Spin-variable coefficients equivalent to the binary quadratic form.

    Energy of spins s in {-1, +1}^n is  constant + linear . s + s^T quadratic s
    (quadratic has zero diagonal) and equals x^T A x at s = 1 - 2x.
    """

    linear: np.ndarray
    quadratic: np.ndarray
    constant: float


def default_penalty(route_set: RouteSet) -> float:
    """Sum of absolute route costs; 1 when all costs vanish."""
    if route_set.n_c == 0:
        raise EmptyRouteSet("route set has no routes")
    total = float(sum(abs(r.cost) for r in route_set.routes))
    return total if total > 0 else 1.0


def build_qubo(
    route_set: RouteSet,
    penalty: float | None = None,
    vehicle_count: int | None = None,
) -> QuboProblem:
    """Compile a route set into the penalized quadratic form.

    A = diag(c) + rho * d^T d - diag(2 rho 1^T d) with d the customer/route
    coverage matrix; offset = rho * N. A fixed vehicle count V adds the
    expansion of rho * (sum_r x_r - V)^2.
    """
    if route_set.n_c == 0:
        raise EmptyRouteSet("route set has no routes")
    rho = default_penalty(route_set) if penalty is None else float(penalty)
    if rho <= 0:
        raise ValueError("penalty must be > 0")

    n_c = route_set.n_c
    n_customers = route_set.instance.n_customers
    costs = np.array([r.cost for r in route_set.routes], dtype=np.float64)
    delta = np.zeros((n_customers, n_c), dtype=np.float64)
    for r, route in enumerate(route_set.routes):
        for node in route.coverage:
            delta[node - 1, r] = 1.0

    matrix = np.diag(costs) + rho * (delta.T @ delta)
    matrix -= np.diag(2.0 * rho * delta.sum(axis=0))
    offset = rho * n_customers
    if vehicle_count is not None:
        matrix += rho
        matrix[np.diag_indices(n_c)] += -2.0 * rho * vehicle_count
        offset += rho * vehicle_count**2
    matrix = (matrix + matrix.T) / 2.0

    return QuboProblem(
        n_c=n_c,
        matrix=matrix,
        penalty=rho,
        offset=float(offset),
        node_count=n_customers,
        route_costs=costs,
        coverage=delta,
        vehicle_count=vehicle_count,
    )


def _check_length(qubo: QuboProblem, x: np.ndarray):
    if x.shape[-1] != qubo.n_c:
        raise LengthMismatch(f"bitstring length {x.shape[-1]} != n_c {qubo.n_c}")


def evaluate(qubo: QuboProblem, x, include_offset: bool = False) -> float:
    """Quadratic form x^T A x, plus the offset when requested."""
    xv = np.asarray(x, dtype=np.float64)
    _check_length(qubo, xv)
    value = float(xv @ qubo.matrix @ xv)
    return value + qubo.offset if include_offset else value


def evaluate_many(qubo: QuboProblem, xs, include_offset: bool = False) -> np.ndarray:
    """Vectorized evaluate over rows of a (batch, n_c) bit matrix."""
    xm = np.asarray(xs, dtype=np.float64)
    _check_length(qubo, xm)
    values = ((xm @ qubo.matrix) * xm).sum(axis=1)
    return values + qubo.offset if include_offset else values


def check_feasibility(qubo: QuboProblem, x) -> EvaluatedSolution:
    """Evaluate a bitstring and test the exact-once coverage constraint."""
    if qubo.coverage is None:
        raise ValueError("problem carries no coverage matrix; cannot check feasibility")
    xv = np.asarray(x, dtype=np.int64)
    _check_length(qubo, xv)
    counts = (qubo.coverage @ xv).astype(np.int64)
    feasible = bool(np.all(counts == 1))
    if qubo.vehicle_count is not None:
        feasible = feasible and int(xv.sum()) == qubo.vehicle_count
    cost = evaluate(qubo, xv, include_offset=True)
    normalized = None
    if qubo.bounds is not None:
        normalized = normalize_cost(cost, qubo.bounds.c_min, qubo.bounds.c_max)
    return EvaluatedSolution(xv, cost, normalized, counts, feasible)


def _lex_keys(bits: np.ndarray) -> np.ndarray:
    # Lexicographic order on (x_0, x_1, ...): x_0 is the most significant digit.
    n = bits.shape[1]
    return (bits * (1 << np.arange(n - 1, -1, -1, dtype=np.int64))).sum(axis=1)


def brute_force(qubo: QuboProblem, cap: int = 26, chunk_bits: int = 18) -> Bounds:
    """Exhaustive scan of all bitstrings; ties go to the lexicographically
    smallest bitstring. Returns certified bounds (offset included)."""
    n = qubo.n_c
    if n > cap:
        raise TooLarge(n, cap)
    best_min = (math.inf, math.inf, None)
    best_max = (-math.inf, math.inf, None)
    total = 1 << n
    step = 1 << min(chunk_bits, n)
    for start in range(0, total, step):
        idx = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = indices_to_bits(idx, n)
        energies = ((bits @ qubo.matrix) * bits).sum(axis=1) + qubo.offset

        lo = energies.min()
        if lo <= best_min[0]:
            where = np.flatnonzero(energies == lo)
            keys = _lex_keys(bits[where].astype(np.int64))
            pick = where[np.argmin(keys)]
            cand = (float(lo), int(keys.min()), bits[pick].astype(np.int64))
            if (cand[0], cand[1]) < (best_min[0], best_min[1]):
                best_min = cand
        hi = energies.max()
        if hi >= best_max[0]:
            where = np.flatnonzero(energies == hi)
            keys = _lex_keys(bits[where].astype(np.int64))
            pick = where[np.argmin(keys)]
            cand = (float(hi), int(keys.min()), bits[pick].astype(np.int64))
            if (-cand[0], cand[1]) < (-best_max[0], best_max[1]):
                best_max = cand
    # Re-evaluate through the scalar path so bounds match evaluate() exactly.
    return Bounds(
        c_min=evaluate(qubo, best_min[2], include_offset=True),
        c_max=evaluate(qubo, best_max[2], include_offset=True),
        x_min=best_min[2],
        x_max=best_max[2],
        certified=True,
        method="brute_force",
    )


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature schedule for single-flip Metropolis annealing."""

    sweeps: int = 300
    t_hi: float | None = None
    t_lo: float | None = None


def _anneal_extreme(matrix, sweeps, t_hi, t_lo, rng):
    n = matrix.shape[0]
    x = rng.integers(0, 2, n).astype(np.float64)
    m = matrix @ x
    energy = float(x @ m)
    best_e, best_x = energy, x.copy()
    diag = np.diag(matrix).copy()
    for s in range(sweeps):
        temp = t_hi * (t_lo / t_hi) ** (s / max(sweeps - 1, 1))
        order = rng.permutation(n)
        accept = rng.random(n)
        for pos, k in enumerate(order):
            d = 1.0 - 2.0 * x[k]
            delta = d * (diag[k] + 2.0 * (m[k] - diag[k] * x[k]))
            if delta <= 0 or accept[pos] < math.exp(-delta / temp):
                x[k] += d
                m += d * matrix[:, k]
                energy += delta
                if energy < best_e:
                    best_e, best_x = energy, x.copy()
    return best_e, best_x


def anneal_bounds(
    qubo: QuboProblem,
    schedule: AnnealSchedule | None = None,
    seed: int = 0,
) -> Bounds:
    """Estimate cost extremes by simulated annealing (non-certified).

    The minimizing and maximizing runs use independent streams derived from
    seed; the maximizing run anneals the negated matrix.
    """
    schedule = schedule or AnnealSchedule()
    scale = float(
        np.max(np.abs(np.diag(qubo.matrix)) + 2.0 * (np.abs(qubo.matrix).sum(axis=1) - np.abs(np.diag(qubo.matrix))))
    )
    t_hi = schedule.t_hi if schedule.t_hi is not None else max(scale, 1e-12)
    t_lo = schedule.t_lo if schedule.t_lo is not None else max(scale * 1e-6, 1e-15)

    rng_min = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))
    rng_max = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,))))
    _, x_min = _anneal_extreme(qubo.matrix, schedule.sweeps, t_hi, t_lo, rng_min)
    _, x_max = _anneal_extreme(-qubo.matrix, schedule.sweeps, t_hi, t_lo, rng_max)
    x_min = x_min.astype(np.int64)
    x_max = x_max.astype(np.int64)
    return Bounds(
        c_min=evaluate(qubo, x_min, include_offset=True),
        c_max=evaluate(qubo, x_max, include_offset=True),
        x_min=x_min,
        x_max=x_max,
        certified=False,
        method="anneal",
    )


def ensure_bounds(qubo: QuboProblem, cap: int = 26, seed: int = 0) -> Bounds:
    """Attach bounds to the problem if absent: brute force when the variable
    count fits under the cap, otherwise annealed estimates."""
    if qubo.bounds is None:
        if qubo.n_c <= cap:
            qubo.bounds = brute_force(qubo, cap=cap)
        else:
            qubo.bounds = anneal_bounds(qubo, seed=seed)
    return qubo.bounds


def normalize_cost(cost: float, c_min: float, c_max: float) -> float:
    """Rescale so c_min maps to 0 and c_max to 1; unclamped outside."""
    if c_max <= c_min:
        raise DegenerateRange(f"c_max {c_max} must exceed c_min {c_min}")
    return float((cost - c_min) / (c_max - c_min))


def to_ising(qubo: QuboProblem) -> IsingView:
    """Expand the binary quadratic form over spin variables s = 1 - 2x."""
    a = qubo.matrix
    diag = np.diag(a)
    constant = float(a.sum() / 4.0 + diag.sum() / 4.0)
    linear = -a.sum(axis=1) / 2.0
    quadratic = a / 4.0
    quadratic = quadratic - np.diag(np.diag(quadratic))
    return IsingView(linear=linear, quadratic=quadratic, constant=constant)


def ising_energy(view: IsingView, spins) -> float:
    s = np.asarray(spins, dtype=np.float64)
    return float(view.constant + view.linear @ s + s @ view.quadratic @ s)
