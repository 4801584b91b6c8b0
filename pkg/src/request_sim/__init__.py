"""Simulation and analysis of copy-based error suppression (VD and REQUEST)."""

from .circuits import (
    CNOT,
    CSWAP,
    CTRL_PAULI,
    RY,
    RZ,
    TOFFOLI,
    XX,
    Circuit,
    Gate,
    Layer,
    Reset,
    decompose_cswap,
    decompose_to_native,
    dumps,
    gate_matrix,
    generate_rqc,
    is_clifford,
    loads,
    to_native,
)
from .clifford import (
    MOptEstimate,
    SubstitutionParams,
    WeightTable,
    estimate_m_opt,
    project_to_near_clifford,
    substitution_weights,
)
from .distill import (
    MitigationPlan,
    MitigationResult,
    build_request_circuit,
    build_vd_circuit,
    estimate_mitigated,
    noise_floor,
    run_mitigation,
    run_mitigation_sweep,
    simulate_vd_equivalent,
    trace_ratio_oracle,
)
from .linalg import (
    PauliProduct,
    SpectralDecomposition,
    matrix_power,
    partial_trace,
    pauli_expectation,
    spectral_decompose,
    tensor_product,
)
from .noise import KrausChannel, NoiseModel
from .scaling import (
    ScalingQuery,
    gd_copies_required,
    gd_trace,
    scaling_sweep,
    shots_required,
    shots_upper_bound,
    trace_lower_bound,
    variance_of_ratio,
)
from .simulate import sample_binomial_estimate, simulate_density, simulate_statevector

__version__ = "0.1.0"
