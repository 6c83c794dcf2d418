//! Dense state-vector simulation of angle-embedded circuits built from
//! strongly entangling layers, with exact Z readout and exact gradients.

mod circuit;
mod gradient;
mod state;

pub use circuit::{
    angle_embed, apply_layers, apply_sel_layer, final_state, run_circuit, CircuitParams, EntanglerRange, ZExpectations,
};
pub use gradient::{
    adjoint_vjp, feature_jacobian, parameter_shift_grad, parameter_shift_jacobian, AdjointResult, QuantumGradient,
};
pub use state::{Pauli, QuantumState, MAX_QUBITS};
