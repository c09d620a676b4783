//! Small dense-state quantum engine for registers of up to a few qubits.
//!
//! Everything is explicit: states are flat complex vectors indexed MSB
//! first by labeled qubits, operators are dense matrices, and mixed states
//! are dense density matrices. There is no circuit IR and no optimization
//! layer; the registers involved never exceed three qubits, so clarity wins
//! over speed everywhere.

pub mod channel;
pub mod density;
pub mod gates;
pub mod matrix;
pub mod measure;
pub mod state;

pub use channel::KrausChannel;
pub use density::DensityMatrix;
pub use matrix::{ALGEBRA_TOL, C64, Matrix};
pub use measure::{BellLabeling, PhaseBasis, bell_probabilities, bell_state, measure_bell,
    measure_phase_basis, phase_basis_probabilities};
pub use state::{PRODUCT_TOL, QubitLabel, StateVector};
