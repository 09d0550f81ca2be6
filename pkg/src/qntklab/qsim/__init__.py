from .backend import backend_name
from .encoders import ANSATZE, EncoderSpec, compile_encoder, default_spec, random_block
from .gates import CNOT_MATRIX, PAULI_X, PAULI_Z, Gate, gate_matrix, u3_matrix
from .random_meas import (
    RandomMeasurement,
    default_local_observable,
    encoded_state,
    feature_matrix,
    features_from_reduced,
    haar_unitaries,
    quantum_features,
    sample_product_2design,
)
from .state import (
    DensityMatrix,
    LocalObservable,
    Statevector,
    all_reduced_densities,
    apply_circuit,
    apply_gate,
    expectation,
    reduced_density,
    run_circuit,
    sample_expectation,
    trace_product,
    zero_state,
)

__all__ = [
    "ANSATZE",
    "CNOT_MATRIX",
    "DensityMatrix",
    "EncoderSpec",
    "Gate",
    "LocalObservable",
    "PAULI_X",
    "PAULI_Z",
    "RandomMeasurement",
    "Statevector",
    "all_reduced_densities",
    "apply_circuit",
    "apply_gate",
    "backend_name",
    "compile_encoder",
    "default_local_observable",
    "default_spec",
    "encoded_state",
    "expectation",
    "feature_matrix",
    "features_from_reduced",
    "gate_matrix",
    "haar_unitaries",
    "quantum_features",
    "random_block",
    "reduced_density",
    "run_circuit",
    "sample_expectation",
    "sample_product_2design",
    "trace_product",
    "u3_matrix",
    "zero_state",
]
