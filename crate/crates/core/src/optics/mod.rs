//! Linear-optical simulation: devices, setups, Fock evolution, and
//! post-selected qubit states.
//!
//! All operations here are pure functions of their inputs; returned values
//! are immutable and safe to share across worker threads.

pub mod device;
pub mod fock;
pub mod qubit;
pub mod setup;

pub use device::{parse_angle, parse_device, Angle, DcKind, Device, OpticalMode, Pol};
pub use fock::{check_angles_on_grid, monomial, run_setup, FockMonomial, FockState};
pub use qubit::{fidelity_up_to_phase, postselect, QubitState};
pub use setup::{OpticalSetup, DEFAULT_MAX_SEQUENCE};
