"""Pulse-level compilation strategies for variational quantum circuits.

Four compilation modes over a common circuit IR and control model:
gate-based lookup, full pulse optimization, strict partial compilation
(precompiled parameter-free blocks), and flexible partial compilation
(single-parameter blocks with pre-tuned optimizer hyperparameters).
"""

from .circuit import (
    Circuit,
    CircuitError,
    Gate,
    MAX_DENSE_WIDTH,
    ParamAngle,
    TABLE_GATE_TIMES,
    bind_parameters,
    build_unitary,
    critical_path_runtime,
    gate_matrix,
    merge_rotations,
)
from .qasm_io import ParseError, parse, serialize
from .hamiltonian import (
    ControlField,
    GHZ_TO_RAD_PER_NS,
    HamiltonianSpec,
    build_controls,
    control_labels,
    grid_edges,
)
from .grape import (
    ControlPulse,
    GrapeConfig,
    GrapeError,
    GrapeResult,
    fidelity,
    gradient,
    grape_optimize,
    propagate,
)
from .mintime import MinTimeConfig, MinTimeError, MinTimeResult, minimal_pulse_time
from .partition import (
    Block,
    PartitionError,
    PartitionPlan,
    block_max_width,
    check_parameter_monotonicity,
    partition_flexible,
    partition_strict,
)
from .pipeline import (
    CacheMissError,
    CompiledSchedule,
    CompileError,
    GatePulseLibrary,
    PulseCache,
    TunedHyperparams,
    analytic_gate_pulse,
    analytic_rotation_pulse,
    build_analytic_library,
    build_gate_library,
    compile_flexible,
    compile_gate_based,
    compile_grape,
    compile_strict,
    gate_baseline,
    precompute_strict,
    schedule_to_pulse,
    tune_hyperparameters,
    tune_plan,
    verify_schedule,
)
from .bench import Graph, QaoaSpec, h2_fixture, qaoa_circuit, random_graph

__version__ = "0.1.0"
