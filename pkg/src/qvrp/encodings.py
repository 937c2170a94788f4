"""Mapping binary variables onto qubits: minimal and full encodings.

Full encoding assigns qubit k to variable k, so one measurement is one
candidate solution. Minimal encoding uses ceil(log2 n_c) register qubits to
address a variable and one ancilla (the highest-index qubit) to carry its
value: the conditional probability of ancilla=1 given register=k is the
marginal p_k with which variable k is set, and candidate solutions are drawn
as independent Bernoulli bits from those marginals. Register states never
observed contribute the agnostic marginal 0.5 (the fallback rule).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qubo import LengthMismatch, QuboProblem, evaluate_many, indices_to_bits
from .simulator import ShotCounts, StateVector, basis_probabilities, make_rng

__all__ = [
    "MinimalLayout",
    "FullLayout",
    "RegisterStats",
    "EXACT_FALLBACK_THRESHOLD",
    "qubits_required",
    "register_stats_from_counts",
    "register_stats_exact",
    "minimal_cost",
    "sample_minimal_solutions",
    "full_cost",
    "full_cost_exact",
    "full_solutions_from_counts",
]

# Exact projector weights below this are treated as unobserved to avoid 0/0.
EXACT_FALLBACK_THRESHOLD = 1e-12


@dataclass(frozen=True)
class MinimalLayout:
    """Register-addressed layout: qubits 0..n_r-1 form the register whose
    basis index k names variable k (indices >= n_c are unassigned), and the
    top qubit is the ancilla."""

    n_c: int

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")

    @property
    def n_r(self) -> int:
        return math.ceil(math.log2(self.n_c)) if self.n_c > 1 else 0

    @property
    def n_a(self) -> int:
        return 1

    @property
    def n_q(self) -> int:
        return self.n_r + 1

    @property
    def ancilla_position(self) -> int:
        return self.n_q - 1


@dataclass(frozen=True)
class FullLayout:
    """One qubit per variable; qubit k is variable k."""

    n_c: int

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")

    @property
    def n_q(self) -> int:
        return self.n_c


def qubits_required(n_c: int, scheme: str) -> int:
    """Qubit budget for n_c binary variables under the given scheme."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    if scheme == "minimal":
        return MinimalLayout(n_c).n_q
    if scheme == "full":
        return n_c
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class RegisterStats:
    """Per-variable projector weights and marginals.

    totals[k] is the weight observed in register state k (shots, or exact
    probability mass), ones[k] the part with ancilla=1, and p[k] their
    ratio; fallback_mask marks variables never observed, where p is pinned
    to 0.5. discarded tallies weight on unassigned register states.
    """

    totals: np.ndarray
    ones: np.ndarray
    p: np.ndarray
    fallback_mask: np.ndarray
    discarded: float
    source: str

    @property
    def n_c(self) -> int:
        return self.p.size


def _split_register(weights: np.ndarray, layout: MinimalLayout):
    # Basis index = ancilla * 2^n_r + register index.
    table = weights.reshape(2, 1 << layout.n_r)
    totals_all = table[0] + table[1]
    ones_all = table[1]
    return totals_all, ones_all


def register_stats_from_counts(counts: ShotCounts, layout: MinimalLayout) -> RegisterStats:
    """Tally shots into per-variable totals/ones under the minimal layout.

    Shots landing on unassigned register states (index >= n_c) are
    discarded and reported, not renormalized into assigned ones.
    """
    if counts.n_q != layout.n_q:
        raise LengthMismatch(f"counts over {counts.n_q} qubits, layout needs {layout.n_q}")
    arr = counts.to_array().astype(np.float64)
    totals_all, ones_all = _split_register(arr, layout)
    totals = totals_all[: layout.n_c]
    ones = ones_all[: layout.n_c]
    fallback = totals == 0
    p = np.where(fallback, 0.5, ones / np.where(fallback, 1.0, totals))
    return RegisterStats(
        totals=totals,
        ones=ones,
        p=p,
        fallback_mask=fallback,
        discarded=float(totals_all[layout.n_c :].sum()),
        source="shots",
    )


def register_stats_exact(sv: StateVector, layout: MinimalLayout) -> RegisterStats:
    """Projector weights straight from amplitudes (the infinite-shot limit)."""
    if sv.n_q != layout.n_q:
        raise LengthMismatch(f"state has {sv.n_q} qubits, layout needs {layout.n_q}")
    totals_all, ones_all = _split_register(basis_probabilities(sv), layout)
    totals = totals_all[: layout.n_c]
    ones = ones_all[: layout.n_c]
    fallback = totals < EXACT_FALLBACK_THRESHOLD
    p = np.where(fallback, 0.5, ones / np.where(fallback, 1.0, totals))
    return RegisterStats(
        totals=totals,
        ones=ones,
        p=p,
        fallback_mask=fallback,
        discarded=float(totals_all[layout.n_c :].sum()),
        source="exact",
    )


def minimal_cost(qubo: QuboProblem, stats: RegisterStats) -> float:
    """Quadratic form of the marginals: sum_{k!=l} A_kl p_k p_l + sum_k A_kk p_k.

    The constant offset is excluded; reports add it back so minimal and
    full costs share an axis.
    """
    if stats.n_c != qubo.n_c:
        raise LengthMismatch(f"stats cover {stats.n_c} variables, problem has {qubo.n_c}")
    p = stats.p
    diag = np.diag(qubo.matrix)
    return float(p @ qubo.matrix @ p - diag @ (p * p) + diag @ p)


def sample_minimal_solutions(stats: RegisterStats, n_samples: int, seed) -> np.ndarray:
    """Draw candidate bitstrings with independent per-variable marginals;
    returns an (n_samples, n_c) 0/1 array."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    u = rng.random((n_samples, stats.n_c))
    return (u < stats.p).astype(np.int8)


def full_cost(qubo: QuboProblem, counts: ShotCounts) -> float:
    """Empirical mean of the quadratic form over measured bitstrings
    (offset excluded); observed basis indices decode directly to solutions."""
    if counts.n_q != qubo.n_c:
        raise LengthMismatch(f"counts over {counts.n_q} qubits, problem has {qubo.n_c}")
    if not counts.counts:
        return 0.0
    indices = np.fromiter(counts.counts.keys(), dtype=np.int64)
    weights = np.fromiter(counts.counts.values(), dtype=np.float64)
    bits = indices_to_bits(indices, qubo.n_c)
    energies = evaluate_many(qubo, bits)
    return float(energies @ weights / weights.sum())


def full_cost_exact(qubo: QuboProblem, probabilities) -> float:
    """Expectation of the quadratic form under exact basis probabilities."""
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.size != 1 << qubo.n_c:
        raise LengthMismatch(f"need 2^{qubo.n_c} probabilities, got {probs.size}")
    bits = indices_to_bits(np.arange(probs.size), qubo.n_c)
    return float(evaluate_many(qubo, bits) @ probs)


def full_solutions_from_counts(counts: ShotCounts) -> list[tuple[np.ndarray, int]]:
    """Decode measured basis indices into (bitstring, multiplicity) pairs,
    ascending by index."""
    out = []
    for index in sorted(counts.counts):
        bits = indices_to_bits([index], counts.n_q)[0].astype(np.int8)
        out.append((bits, counts.counts[index]))
    return out
