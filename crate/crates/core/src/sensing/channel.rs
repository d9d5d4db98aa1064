//! The phase-encoding channel: unitary evolution under `exp(-i theta H / 2)`,
//! exact response functions, and finite-shot sampling.
//!
//! Convention: the channel generator is `G = H / 2` (so a GHZ probe under
//! the collective-Z Hamiltonian picks up the relative phase `N theta`), and
//! the quantum Fisher information is `4 Var(G) = Var(H)`.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optics::QubitState;
use crate::scalar::{Real, C};
use crate::sensing::pauli::{Hamiltonian, Observable};

/// Apply `exp(-i theta H / 2)`. For commuting Pauli-word terms this is the
/// product of per-term rotations `cos(theta/2) I - i sin(theta/2) h_j`.
pub fn evolve<R: Real>(state: &QubitState<R>, h: &Hamiltonian, theta: R) -> Result<QubitState<R>> {
    if state.n_qubits() != h.n_sites() {
        return Err(Error::DimensionMismatch { expected: h.n_sites(), got: state.n_qubits() });
    }
    let half = theta * R::of(0.5);
    let cos = Complex::new(half.cos(), R::zero());
    let minus_i_sin = Complex::new(R::zero(), -half.sin());
    let mut amps: Vec<C<R>> = state.amplitudes().to_vec();
    for term in h.terms() {
        let rotated = term.apply(&amps);
        for (a, r) in amps.iter_mut().zip(rotated) {
            *a = cos * *a + minus_i_sin * r;
        }
    }
    // per-term rotations are unitary, so no renormalization happens here
    Ok(QubitState::raw(amps, state.success_prob(), state.n_qubits()))
}

/// Exact response `R(theta) = <psi_theta| O |psi_theta>`.
pub fn response_exact<R: Real>(
    state: &QubitState<R>,
    h: &Hamiltonian,
    obs: &Observable,
    theta: R,
) -> Result<R> {
    let evolved = evolve(state, h, theta)?;
    let applied = obs.0.apply(evolved.amplitudes());
    let mut value = Complex::new(R::zero(), R::zero());
    for (a, b) in evolved.amplitudes().iter().zip(&applied) {
        value += a.conj() * b;
    }
    debug_assert!(value.im.abs() < R::of(1e-10), "response must be real");
    Ok(value.re)
}

/// Average of `shots` single-shot +-1 outcomes with `P(+1) = (1 + R) / 2`.
/// Deterministic given the generator state.
pub fn sample_response<R: Real>(
    state: &QubitState<R>,
    h: &Hamiltonian,
    obs: &Observable,
    theta: R,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> Result<R> {
    let r = response_exact(state, h, obs, theta)?;
    let p_plus = (0.5 * (1.0 + r.to_f64_lossy())).clamp(0.0, 1.0);
    let mut plus = 0u64;
    for _ in 0..shots {
        if rng.random::<f64>() < p_plus {
            plus += 1;
        }
    }
    Ok(R::of(2.0 * plus as f64 / shots as f64 - 1.0))
}
