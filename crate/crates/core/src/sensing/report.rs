//! Agnostic-channel sensing runs and their serialized reports.
//!
//! The estimator only ever sees a [`BlackBoxChannel`]: it can request
//! shot-averaged readings at chosen angles, but the Hamiltonian hiding
//! inside the channel is not reachable through the trait. The optional
//! exact-response hook exists purely so reports can record validation
//! errors when the ground truth is available.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optics::QubitState;
use crate::scalar::{derive_seed, Real};
use crate::sensing::channel::{response_exact, sample_response};
use crate::sensing::pauli::{Hamiltonian, Observable};
use crate::sensing::trig::{fit_trig, sensitivity, uniform_nodes, TrigPoly, SLOPE_FLOOR};

/// Shot budget per channel query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    /// Idealized infinite-shot limit: the exact expectation value.
    Infinite,
    Finite(u64),
}

/// The estimator-facing face of a sensing channel. Implementations hold the
/// probe, the encoding Hamiltonian, and the measurement, but expose only
/// sampled readings.
pub trait BlackBoxChannel<R: Real> {
    /// A shot-averaged reading of the response at `theta`.
    fn respond(&self, theta: R, shots: Shots, rng: &mut ChaCha8Rng) -> Result<R>;

    /// Ground-truth response for validation, when the implementation can
    /// provide one. Estimation never depends on it.
    fn exact_response(&self, _theta: R) -> Option<R> {
        None
    }
}

/// A probe evolving under a hidden Pauli-sum Hamiltonian, measured against
/// a Pauli observable.
pub struct PauliChannel<R: Real> {
    probe: QubitState<R>,
    hamiltonian: Hamiltonian,
    observable: Observable,
}

impl<R: Real> PauliChannel<R> {
    pub fn new(probe: QubitState<R>, hamiltonian: Hamiltonian, observable: Observable) -> Self {
        PauliChannel { probe, hamiltonian, observable }
    }
}

impl<R: Real> BlackBoxChannel<R> for PauliChannel<R> {
    fn respond(&self, theta: R, shots: Shots, rng: &mut ChaCha8Rng) -> Result<R> {
        match shots {
            Shots::Infinite => {
                response_exact(&self.probe, &self.hamiltonian, &self.observable, theta)
            }
            Shots::Finite(m) => sample_response(
                &self.probe,
                &self.hamiltonian,
                &self.observable,
                theta,
                m.max(1),
                rng,
            ),
        }
    }

    fn exact_response(&self, theta: R) -> Option<R> {
        response_exact(&self.probe, &self.hamiltonian, &self.observable, theta).ok()
    }
}

/// Number of grid points for the sensitivity curve.
pub const SENSITIVITY_GRID: usize = 512;

/// Everything a sensing run produces: node readings, the fitted response,
/// the sensitivity curve, and the quantum limits for `N` qubits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensingReport<R: Real> {
    pub n_qubits: usize,
    pub degree: usize,
    pub shots: Shots,
    pub seed: u64,
    /// Interpolation nodes `2 pi (k-1) / (2n+1)`.
    pub nodes: Vec<R>,
    /// Shot-averaged readings at the nodes.
    pub readings: Vec<R>,
    pub poly: TrigPoly<R>,
    /// Sensitivity sample angles (uniform grid over one period).
    pub grid: Vec<R>,
    /// `(Delta theta)^2` at each grid angle; divergent points are +inf.
    pub sensitivity: Vec<R>,
    /// Slope floor below which sensitivity is reported divergent.
    pub slope_floor: R,
    /// Max |reading - exact| over the nodes, when ground truth is available.
    pub max_node_error: Option<R>,
    /// Mean |fit - exact| over the grid, when ground truth is available.
    pub mean_abs_error: Option<R>,
    /// Minimum finite sensitivity over the grid, if any point is finite.
    pub min_sensitivity: Option<R>,
    /// True when the response is flat everywhere (all points divergent).
    pub all_divergent: bool,
    /// Standard quantum limit `1/N`.
    pub sql: R,
    /// Heisenberg limit `1/N^2`.
    pub hl: R,
}

/// Query the channel at the `2n + 1` uniform nodes, fit the response, and
/// assemble sensitivity samples against the SQL and HL references.
///
/// Each node gets an independent random stream derived from `(seed, node)`,
/// so results do not depend on query order.
pub fn run_sensing<R: Real>(
    channel: &dyn BlackBoxChannel<R>,
    n_qubits: usize,
    degree: usize,
    shots: Shots,
    seed: u64,
) -> Result<SensingReport<R>> {
    let nodes = uniform_nodes::<R>(degree);
    let mut readings = Vec::with_capacity(nodes.len());
    for (k, &theta) in nodes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
        readings.push(channel.respond(theta, shots, &mut rng)?);
    }
    let poly = fit_trig(&readings, degree)?;
    let floor = R::of(SLOPE_FLOOR);
    let tau = R::of(2.0 * std::f64::consts::PI);
    let grid: Vec<R> =
        (0..SENSITIVITY_GRID).map(|i| tau * R::of(i as f64 / SENSITIVITY_GRID as f64)).collect();
    let sens: Vec<R> = grid.iter().map(|&t| sensitivity(&poly, t, floor)).collect();
    let min_sensitivity =
        sens.iter().copied().filter(|s| s.is_finite()).fold(None, |acc: Option<R>, s| {
            Some(acc.map_or(s, |a| a.min(s)))
        });
    let mut max_node_error = None;
    let mut mean_abs_error = None;
    if let Some(exact_at) = nodes
        .iter()
        .map(|&t| channel.exact_response(t))
        .collect::<Option<Vec<R>>>()
    {
        let worst = readings
            .iter()
            .zip(&exact_at)
            .map(|(r, e)| (*r - *e).abs())
            .fold(R::zero(), R::max);
        max_node_error = Some(worst);
        let mut total = R::zero();
        let mut count = 0usize;
        for &t in &grid {
            if let Some(e) = channel.exact_response(t) {
                total += (poly.eval(t) - e).abs();
                count += 1;
            }
        }
        if count > 0 {
            mean_abs_error = Some(total / R::of(count as f64));
        }
    }
    let n = R::of(n_qubits as f64);
    Ok(SensingReport {
        n_qubits,
        degree,
        shots,
        seed,
        nodes,
        readings,
        poly,
        grid,
        all_divergent: min_sensitivity.is_none(),
        sensitivity: sens,
        slope_floor: floor,
        max_node_error,
        mean_abs_error,
        min_sensitivity,
        sql: n.recip(),
        hl: (n * n).recip(),
    })
}

impl<R: Real + serde::Serialize> SensingReport<R> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl<R: Real> SensingReport<R> {
    /// Two-column CSV of the sensitivity curve with the SQL/HL reference
    /// levels repeated per row for plotting.
    pub fn write_sensitivity_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "theta,sensitivity,sql,hl")?;
        for (theta, s) in self.grid.iter().zip(&self.sensitivity) {
            let value = if s.is_finite() { format!("{s}") } else { "inf".to_string() };
            writeln!(out, "{theta},{value},{},{}", self.sql, self.hl)?;
        }
        Ok(())
    }

    /// CSV of node readings alongside the fitted curve.
    pub fn write_response_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "theta,reading,fitted")?;
        for (theta, reading) in self.nodes.iter().zip(&self.readings) {
            writeln!(out, "{theta},{reading},{}", self.poly.eval(*theta))?;
        }
        Ok(())
    }
}

use rand::SeedableRng;
