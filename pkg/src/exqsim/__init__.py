"""Exchange-only encoded quantum computing: gate synthesis and noisy trajectory simulation."""

__version__ = "0.1.0"

from .algorithms import (
    DJOracle,
    EncodedCircuit,
    build_dj_circuit,
    compile_logical_circuit,
    dj_algorithmic_fidelity,
    sandwiched_cnot_comparison,
)
from .exchange import (
    ExchangePulse,
    ExchangeSchedule,
    apply_schedule,
    exchange_unitary,
    lift_nonadjacent,
    merge_pulses,
    schedule_total_time,
    schedule_unitary,
)
from .hilbert import (
    LogicalCodec,
    RngStream,
    apply_single_spin_op,
    encode_logical,
    sample_logical_bloch_state,
    subspace_weights,
)
from .library import build_cnot13, canonical_library
from .mcwf import (
    FidelityEstimate,
    NoiseModel,
    StepSizeError,
    TrajectoryConfig,
    analytic_dephasing_fidelity,
    conditional_step,
    dense_step,
    ensemble_fidelity,
    run_trajectory,
    split_step,
)
from .quaternion import (
    NoSolution,
    Quaternion,
    assemble_analytic_cnot,
    q_euler,
    q_from_exchange,
    q_mul,
    solve_phase_system,
    solve_three_exchange,
)
from .synth import cnot_cost, is_locally_equivalent, makhlin_class, multi_start_synthesize, nelder_mead
