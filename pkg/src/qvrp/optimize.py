"""Gradient-based optimization of ansatz parameters against either encoding.

Gradients come from the two-point parameter-shift rule. For the full
encoding the cost is linear in basis probabilities, so shifting the scalar
cost is already exact. For the minimal encoding the cost is a nonlinear
function of projector expectations, so the exact gradient shifts each
expectation and combines them through the quotient and chain rules;
shifting the scalar cost there is only an approximation (selectable as
gradient_mode="naive_shift").

All shot noise is driven by streams derived from (seed, start, slot...)
keys, so runs are reproducible and the two evaluations of a shift pair can
share a stream (common random numbers) to cut gradient variance.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .encodings import (
    EXACT_FALLBACK_THRESHOLD,
    FullLayout,
    MinimalLayout,
    RegisterStats,
    full_solutions_from_counts,
    register_stats_exact,
    register_stats_from_counts,
    sample_minimal_solutions,
)
from .qubo import (
    Bounds,
    EvaluatedSolution,
    QuboProblem,
    check_feasibility,
    ensure_bounds,
    evaluate_many,
    indices_to_bits,
    normalize_cost,
)
from .simulator import (
    AnsatzSpec,
    ShotCounts,
    StateVector,
    basis_probabilities,
    build_ansatz,
    make_rng,
    prng_metadata,
    run_statevector,
    run_statevector_batch,
    sample,
)

__all__ = [
    "AdamConfig",
    "AdamState",
    "RunConfig",
    "OptimizationTrace",
    "SolutionRecord",
    "ExperimentResult",
    "MinimalEvaluator",
    "FullEvaluator",
    "make_evaluator",
    "gradient_parameter_shift",
    "adam_step",
    "run_optimization",
    "run_experiment",
]

SHIFT = np.pi / 2.0


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class RunConfig:
    """Experiment knobs; the defaults give 20 starts x 10 samples with a
    4-layer ansatz and exact (infinite-shot) evaluation."""

    encoding: str = "minimal"
    layers: int = 4
    n_starts: int = 20
    samples_per_start: int = 10
    n_shots: int | str | None = "exact"
    max_iterations: int = 500
    seed: int = 0
    gradient_mode: str | None = None
    adam: AdamConfig = AdamConfig()
    plateau_tol: float | None = None
    plateau_window: int = 50
    common_random_numbers: bool = True

    def __post_init__(self):
        if self.encoding not in ("minimal", "full"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        shots = self.n_shots
        if isinstance(shots, str):
            if shots != "exact":
                raise ValueError(f"n_shots must be a positive int or 'exact', got {shots!r}")
            shots = None
        if shots is not None and shots < 1:
            raise ValueError("n_shots must be >= 1")
        object.__setattr__(self, "n_shots", shots)
        if self.gradient_mode not in (None, "chain_rule", "naive_shift"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")

    @property
    def exact(self) -> bool:
        return self.n_shots is None

    @property
    def resolved_gradient_mode(self) -> str:
        if self.gradient_mode is not None:
            return self.gradient_mode
        return "chain_rule" if self.encoding == "minimal" else "naive_shift"


class MinimalEvaluator:
    """Cost and projector statistics for the minimal encoding.

    n_shots None means exact expectations straight from amplitudes. Keys
    passed to the evaluation methods name the shot stream; they are ignored
    in exact mode.
    """

    encoding = "minimal"

    def __init__(self, qubo: QuboProblem, ansatz: AnsatzSpec, n_shots: int | None = None, seed: int = 0):
        self.qubo = qubo
        self.layout = MinimalLayout(qubo.n_c)
        if ansatz.n_q != self.layout.n_q:
            raise ValueError(f"ansatz has {ansatz.n_q} qubits, layout needs {self.layout.n_q}")
        self.ansatz = ansatz
        self.n_shots = n_shots
        self.seed = seed
        self._diag = np.diag(qubo.matrix).copy()

    @property
    def parameter_count(self) -> int:
        return self.ansatz.parameter_count

    def final_state(self, theta) -> StateVector:
        return run_statevector(self.ansatz, theta)

    def final_stats(self, theta, key=()) -> RegisterStats:
        if self.n_shots is None:
            return register_stats_exact(self.final_state(theta), self.layout)
        counts = sample(self.final_state(theta), self.n_shots, make_rng(self.seed, *key))
        return register_stats_from_counts(counts, self.layout)

    def raw_marginals_batch(self, thetas, keys=None):
        """(totals, ones) weight arrays of shape (batch, n_c)."""
        states = run_statevector_batch(self.ansatz, thetas)
        probs = np.abs(states) ** 2
        n_r = self.layout.n_r
        if self.n_shots is not None:
            weights = np.empty_like(probs)
            for row in range(probs.shape[0]):
                rng = make_rng(self.seed, *keys[row])
                weights[row] = rng.multinomial(self.n_shots, probs[row] / probs[row].sum())
            probs = weights
        table = probs.reshape(probs.shape[0], 2, 1 << n_r)
        totals = table[:, 0, : self.qubo.n_c] + table[:, 1, : self.qubo.n_c]
        ones = table[:, 1, : self.qubo.n_c]
        return totals, ones

    def marginals_batch(self, thetas, keys=None):
        """(p, fallback_mask) per batch row, applying the 0.5 fallback."""
        totals, ones = self.raw_marginals_batch(thetas, keys)
        fallback = totals < EXACT_FALLBACK_THRESHOLD
        p = np.where(fallback, 0.5, ones / np.where(fallback, 1.0, totals))
        return p, fallback

    def cost_from_p(self, p: np.ndarray) -> np.ndarray:
        pm = np.atleast_2d(p)
        values = ((pm @ self.qubo.matrix) * pm).sum(axis=1)
        values -= (pm * pm) @ self._diag
        values += pm @ self._diag
        return values

    def cost_batch(self, thetas, keys=None) -> np.ndarray:
        p, _ = self.marginals_batch(thetas, keys)
        return self.cost_from_p(p)

    def cost(self, theta, key=()) -> float:
        keys = None if self.n_shots is None else [key]
        return float(self.cost_batch(np.asarray(theta)[None, :], keys)[0])

    def cost_gradient_p(self, p: np.ndarray) -> np.ndarray:
        # d/dp_k of the marginal quadratic form
        return 2.0 * (self.qubo.matrix @ p) - 2.0 * self._diag * p + self._diag


class FullEvaluator:
    """Cost under the full encoding: expectation of per-basis energies."""

    encoding = "full"

    def __init__(self, qubo: QuboProblem, ansatz: AnsatzSpec, n_shots: int | None = None, seed: int = 0):
        if qubo.n_c > 24:
            raise ValueError(f"full encoding needs 2^{qubo.n_c} amplitudes; refusing n_c > 24")
        self.qubo = qubo
        self.layout = FullLayout(qubo.n_c)
        if ansatz.n_q != self.layout.n_q:
            raise ValueError(f"ansatz has {ansatz.n_q} qubits, layout needs {self.layout.n_q}")
        self.ansatz = ansatz
        self.n_shots = n_shots
        self.seed = seed
        bits = indices_to_bits(np.arange(1 << qubo.n_c), qubo.n_c)
        self.energies = evaluate_many(qubo, bits)

    @property
    def parameter_count(self) -> int:
        return self.ansatz.parameter_count

    def final_state(self, theta) -> StateVector:
        return run_statevector(self.ansatz, theta)

    def cost_batch(self, thetas, keys=None) -> np.ndarray:
        states = run_statevector_batch(self.ansatz, thetas)
        probs = np.abs(states) ** 2
        if self.n_shots is None:
            return probs @ self.energies
        out = np.empty(probs.shape[0])
        for row in range(probs.shape[0]):
            rng = make_rng(self.seed, *keys[row])
            drawn = rng.multinomial(self.n_shots, probs[row] / probs[row].sum())
            out[row] = (drawn @ self.energies) / self.n_shots
        return out

    def cost(self, theta, key=()) -> float:
        keys = None if self.n_shots is None else [key]
        return float(self.cost_batch(np.asarray(theta)[None, :], keys)[0])


def make_evaluator(qubo: QuboProblem, config: RunConfig, start_seed: int = 0):
    n_q = MinimalLayout(qubo.n_c).n_q if config.encoding == "minimal" else qubo.n_c
    ansatz = build_ansatz(n_q, config.layers)
    cls = MinimalEvaluator if config.encoding == "minimal" else FullEvaluator
    return cls(qubo, ansatz, n_shots=config.n_shots, seed=config.seed)


def gradient_parameter_shift(
    evaluator,
    theta,
    mode: str | None = None,
    key: tuple = (),
    common_random_numbers: bool = True,
) -> np.ndarray:
    """Gradient of the evaluator's cost at theta via +-pi/2 shifts.

    mode "naive_shift" shifts the scalar cost; "chain_rule" (minimal
    encoding only; the default there) shifts each projector expectation and
    is exact even though the cost is nonlinear in them. For the full
    encoding both modes coincide, since the cost is linear in the shifted
    expectations. key prefixes the shot streams of this gradient evaluation.
    """
    theta = np.asarray(theta, dtype=np.float64)
    n_par = theta.size
    if mode is None:
        mode = "chain_rule" if evaluator.encoding == "minimal" else "naive_shift"
    eye = np.eye(n_par) * SHIFT
    plus = theta[None, :] + eye
    minus = theta[None, :] - eye

    if mode == "naive_shift" or evaluator.encoding == "full":
        stacked = np.vstack([plus, minus])
        keys = None
        if evaluator.n_shots is not None:
            if common_random_numbers:
                keys = [key + (j,) for j in range(n_par)] * 2
            else:
                keys = [key + (j, 0) for j in range(n_par)] + [key + (j, 1) for j in range(n_par)]
        costs = evaluator.cost_batch(stacked, keys)
        return (costs[:n_par] - costs[n_par:]) / 2.0

    if mode != "chain_rule":
        raise ValueError(f"unknown gradient mode {mode!r}")

    # chain rule over projector expectations (minimal encoding)
    stacked = np.vstack([theta[None, :], plus, minus])
    keys = None
    if evaluator.n_shots is not None:
        base_key = [key + (n_par,)]
        if common_random_numbers:
            pair = [key + (j,) for j in range(n_par)]
            keys = base_key + pair + pair
        else:
            keys = (
                base_key
                + [key + (j, 0) for j in range(n_par)]
                + [key + (j, 1) for j in range(n_par)]
            )
    totals, ones = evaluator.raw_marginals_batch(stacked, keys)
    base_t, base_o = totals[0], ones[0]
    d_t = (totals[1 : n_par + 1] - totals[n_par + 1 :]) / 2.0
    d_o = (ones[1 : n_par + 1] - ones[n_par + 1 :]) / 2.0

    fallback = base_t < EXACT_FALLBACK_THRESHOLD
    safe_t = np.where(fallback, 1.0, base_t)
    p = np.where(fallback, 0.5, base_o / safe_t)
    # quotient rule per variable; unobserved variables contribute nothing
    dp = (base_t[None, :] * d_o - base_o[None, :] * d_t) / (safe_t[None, :] ** 2)
    dp[:, fallback] = 0.0
    return dp @ evaluator.cost_gradient_p(p)


@dataclass
class AdamState:
    """First/second moment accumulators; t counts completed steps."""

    m: np.ndarray
    v: np.ndarray
    t: int
    config: AdamConfig

    @classmethod
    def fresh(cls, n_parameters: int, config: AdamConfig | None = None) -> "AdamState":
        return cls(
            m=np.zeros(n_parameters),
            v=np.zeros(n_parameters),
            t=0,
            config=config or AdamConfig(),
        )


def adam_step(state: AdamState, theta, gradient) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected moment update; returns the new state and theta."""
    g = np.asarray(gradient, dtype=np.float64)
    cfg = state.config
    if g.shape != state.m.shape:
        raise ValueError(f"gradient shape {g.shape} != state shape {state.m.shape}")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_theta = np.asarray(theta, dtype=np.float64) - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return AdamState(m=m, v=v, t=t, config=cfg), new_theta


@dataclass
class OptimizationTrace:
    """Per-iteration record of one optimization run."""

    start_seed: int
    costs: list[float]
    normalized_costs: list[float] | None
    fallback_counts: list[int]
    final_theta: np.ndarray
    wall_times: list[float] = field(repr=False, default_factory=list)
    rng: dict = field(default_factory=dict)


def run_optimization(qubo: QuboProblem, config: RunConfig, start_seed: int = 0) -> OptimizationTrace:
    """ADAM descent from a uniformly random angle start.

    Streams are keyed by (config.seed, start_seed, slot), so distinct
    start_seed values give independent starts and repeated calls are
    identical. No early stopping unless plateau_tol is set.
    """
    evaluator = make_evaluator(qubo, config, start_seed)
    n_par = evaluator.parameter_count
    theta = make_rng(config.seed, start_seed, 0).uniform(0.0, 2.0 * np.pi, n_par)
    state = AdamState.fresh(n_par, config.adam)
    mode = config.resolved_gradient_mode

    costs: list[float] = []
    fallbacks: list[int] = []
    walls: list[float] = []
    flat_run = 0
    for it in range(config.max_iterations):
        tick = time.perf_counter()
        if config.encoding == "minimal":
            p, fb = evaluator.marginals_batch(
                np.asarray(theta)[None, :],
                None if config.exact else [(start_seed, 1, it)],
            )
            cost = float(evaluator.cost_from_p(p)[0])
            n_fallback = int(fb[0].sum())
        else:
            cost = evaluator.cost(theta, key=(start_seed, 1, it))
            n_fallback = 0
        costs.append(cost)
        fallbacks.append(n_fallback)

        grad = gradient_parameter_shift(
            evaluator,
            theta,
            mode=mode,
            key=(start_seed, 2, it),
            common_random_numbers=config.common_random_numbers,
        )
        state, theta = adam_step(state, theta, grad)
        walls.append(time.perf_counter() - tick)

        if config.plateau_tol is not None and len(costs) >= 2:
            flat_run = flat_run + 1 if abs(costs[-1] - costs[-2]) < config.plateau_tol else 0
            if flat_run >= config.plateau_window:
                break

    normalized = None
    if qubo.bounds is not None:
        normalized = [
            normalize_cost(c + qubo.offset, qubo.bounds.c_min, qubo.bounds.c_max) for c in costs
        ]
    return OptimizationTrace(
        start_seed=start_seed,
        costs=costs,
        normalized_costs=normalized,
        fallback_counts=fallbacks,
        final_theta=theta,
        wall_times=walls,
        rng={"seed": config.seed, "start_seed": start_seed, **prng_metadata()},
    )


@dataclass(frozen=True)
class SolutionRecord:
    start_id: int
    sample_id: int
    solution: EvaluatedSolution


@dataclass
class ExperimentResult:
    """Everything a multistart run produced: traces, sampled solutions,
    the bounds used for normalization, and the configuration echo."""

    config: RunConfig
    traces: list[OptimizationTrace]
    solutions: list[SolutionRecord]
    bounds: Bounds
    offset: float
    prng: dict

    @property
    def best_solution(self) -> SolutionRecord:
        return min(self.solutions, key=lambda r: (r.solution.cost, r.start_id, r.sample_id))

    @property
    def feasible_fraction(self) -> float:
        if not self.solutions:
            return 0.0
        return sum(1 for r in self.solutions if r.solution.feasible) / len(self.solutions)


def _sample_start_solutions(qubo, config, evaluator, trace) -> list[EvaluatedSolution]:
    i = trace.start_seed
    final = evaluator.final_state(trace.final_theta)
    if config.encoding == "minimal":
        if config.exact:
            stats = register_stats_exact(final, evaluator.layout)
        else:
            counts = sample(final, config.n_shots, make_rng(config.seed, i, 3, 0))
            stats = register_stats_from_counts(counts, evaluator.layout)
        bits = sample_minimal_solutions(stats, config.samples_per_start, make_rng(config.seed, i, 3, 1))
        rows = [bits[s] for s in range(config.samples_per_start)]
    else:
        counts = sample(final, config.samples_per_start, make_rng(config.seed, i, 3, 0))
        rows = []
        for bits_row, mult in full_solutions_from_counts(counts):
            rows.extend([bits_row] * mult)
    return [check_feasibility(qubo, row) for row in rows]


def run_experiment(qubo: QuboProblem, config: RunConfig, threads: int = 1) -> ExperimentResult:
    """n_starts independent optimizations, then samples_per_start candidate
    solutions drawn from each final state, evaluated and normalized.

    Bounds are attached to the problem if missing (certified brute force
    when the size permits, annealed estimates otherwise). Starts may run on
    a thread pool; results are ordered by start index either way.
    """
    ensure_bounds(qubo, seed=config.seed)

    def one_start(i: int) -> OptimizationTrace:
        return run_optimization(qubo, config, start_seed=i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(one_start, range(config.n_starts)))
    else:
        traces = [one_start(i) for i in range(config.n_starts)]

    solutions: list[SolutionRecord] = []
    for trace in traces:
        evaluator = make_evaluator(qubo, config, trace.start_seed)
        evaluated = _sample_start_solutions(qubo, config, evaluator, trace)
        for s, sol in enumerate(evaluated):
            solutions.append(SolutionRecord(start_id=trace.start_seed, sample_id=s, solution=sol))

    return ExperimentResult(
        config=config,
        traces=traces,
        solutions=solutions,
        bounds=qubo.bounds,
        offset=qubo.offset,
        prng={"seed": config.seed, **prng_metadata()},
    )
