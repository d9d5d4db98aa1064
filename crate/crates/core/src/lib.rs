//! Search and estimation for optical quantum sensing.
//!
//! This crate implements the full pipeline for designing photon-pair probe
//! states and using them to estimate an unknown phase:
//!
//! - [`optics`] simulates linear-optical setups (down-conversion sources,
//!   beam splitters, wave plates) into multi-photon Fock states and
//!   post-selects logical qubit probes.
//! - [`sensing`] encodes the phase channel, computes quantum Fisher
//!   information, fits response functions by trigonometric interpolation,
//!   and derives sensitivity curves against the standard quantum limit and
//!   the Heisenberg limit.
//! - [`dataset`] samples random setups and labels them with exact QFI.
//! - [`graph`] encodes setups as DAGs (node features + adjacency).
//! - [`surrogate`] is a from-scratch graph transformer with reverse-mode
//!   differentiation that learns to predict QFI from the DAG encoding.
//! - [`search`] ranks candidate setups by predicted QFI, validates them
//!   against the simulator, and prunes redundant devices.
//!
//! The numeric core is generic over the scalar type (see [`scalar::Real`]);
//! the aliases below fix `f64` for ordinary use.

pub mod dataset;
pub mod error;
pub mod golden;
pub mod graph;
pub mod optics;
pub mod scalar;
pub mod search;
pub mod sensing;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::{derive_seed, Real, C};

/// `f64` instantiations of the generic core types.
pub type FockState64 = optics::FockState<f64>;
pub type QubitState64 = optics::QubitState<f64>;
pub type TrigPoly64 = sensing::TrigPoly<f64>;
pub type SensingReport64 = sensing::SensingReport<f64>;
pub type SurrogateModel64 = surrogate::SurrogateModel<f64>;
