"""Qubit-efficient variational solving of vehicle routing with time windows.

Pipeline: enumerate feasible routes (vrptw, instances), compile route
selection into a penalized binary quadratic form (qubo), prepare
parameterized states on a dense statevector simulator (simulator), read
candidate solutions out through the minimal or full encoding (encodings),
and optimize the circuit parameters with parameter-shift gradients and ADAM
across many starts (optimize). serialize and cli cover file formats,
report bundles, and the command-line driver.
"""

from .encodings import (
    FullLayout,
    MinimalLayout,
    RegisterStats,
    full_cost,
    full_cost_exact,
    full_solutions_from_counts,
    minimal_cost,
    qubits_required,
    register_stats_exact,
    register_stats_from_counts,
    sample_minimal_solutions,
)
from .instances import instance_with_route_count, partition_instance
from .optimize import (
    AdamConfig,
    AdamState,
    ExperimentResult,
    FullEvaluator,
    MinimalEvaluator,
    OptimizationTrace,
    RunConfig,
    adam_step,
    gradient_parameter_shift,
    make_evaluator,
    run_experiment,
    run_optimization,
)
from .qubo import (
    Bounds,
    EvaluatedSolution,
    IsingView,
    QuboProblem,
    anneal_bounds,
    brute_force,
    build_qubo,
    check_feasibility,
    default_penalty,
    ensure_bounds,
    evaluate,
    evaluate_many,
    normalize_cost,
    to_ising,
)
from .simulator import (
    AnsatzSpec,
    ShotCounts,
    StateVector,
    basis_probabilities,
    build_ansatz,
    run_statevector,
    sample,
)
from .vrptw import (
    Arc,
    GenerateConfig,
    Node,
    Route,
    RouteSet,
    VrptwInstance,
    generate_routes,
    max_routes,
    route_cost,
    validate_route,
)

__version__ = "0.1.0"
