//! Phase sensing: channel evolution, quantum Fisher information,
//! response-function interpolation, and sensitivity analysis.
//!
//! The channel convention is fixed once here: evolution is
//! `exp(-i theta H / 2)` with generator `G = H / 2`, so QFI is `Var(H)` and
//! a GHZ-N probe under the collective-Z Hamiltonian reaches `N^2` (the
//! Heisenberg limit `(Delta theta)^2 = 1/N^2`).

pub mod channel;
pub mod pauli;
pub mod qfi;
pub mod report;
pub mod trig;

pub use channel::{evolve, response_exact, sample_response};
pub use pauli::{Hamiltonian, HamiltonianKind, Observable, ObservableKind, PauliWord};
pub use qfi::{hermitian_eigen, qfi_mixed, qfi_pure, CMatrix};
pub use report::{
    run_sensing, BlackBoxChannel, PauliChannel, SensingReport, Shots, SENSITIVITY_GRID,
};
pub use trig::{
    fit_trig, infer_theta, sensitivity, uniform_nodes, ThetaCandidate, TrigPoly, INFER_GRID_BITS,
    SLOPE_FLOOR,
};
