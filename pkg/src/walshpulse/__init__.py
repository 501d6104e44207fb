"""Walsh-function pulse compiler and exact state-vector verifier.

Compiles target two-body spin Hamiltonians (or parallel two-qubit gate
layers) into pulse schedules executable on an always-on XY resource
Hamiltonian, and verifies the result by exact simulation under coherent
pulse-error models.
"""

__version__ = "0.1.0"

from .analysis import (
    average_hamiltonian,
    cluster_reference,
    dqa_run,
    external_field_average,
    fidelity,
    fit_loglog_slope,
    kappa_tau_budget,
    maxcut_config_energies,
    maxcut_energy_gap,
    ra_error_operator,
    stabilizer_expectations,
    surface7_compile,
    surface7_run,
    surface7_stabilizers,
    trotter_alpha_constant,
    trotter_bound,
    x_basis_probabilities,
)
from .compiler import (
    CutoffConfig,
    PulseSchedule,
    ResourceHamiltonian,
    RobustnessPolicy,
    TargetSpec,
    TwoQubitGate,
    compile,
    concat_schedules,
    dd_guard,
    execution_tau,
    gate_layer_to_target,
    pulse_count,
    robustify,
)
from .experiments import EXPERIMENTS, RESULT_HEADER, ExperimentRecord, read_csv, write_csv
from .graphs import WeightedGraph, greedy_degree1, hamilton_path_decompose, named_graph
from .sim import (
    ErrorModel,
    PauliStringOperator,
    evolve,
    haar_random_state,
    measure_qubit,
    resource_operator,
    run_schedule,
    two_body_operator,
    zero_state,
)
from .walsh import WalshAssignment, hadamard_matrix, hadamard_row, pulse_layers, sequence_length
