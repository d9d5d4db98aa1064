//! Post-selected logical qubit states.
//!
//! Coincidence detection keeps only monomials with exactly one photon per
//! path; the surviving photon's polarization on path `p` becomes qubit `p`
//! (V -> |0>, H -> |1>). Basis indices are big-endian in path order, so path
//! `a` is the most significant bit.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::optics::device::{OpticalMode, Pol};
use crate::optics::fock::{FockMonomial, FockState};
use crate::scalar::{Real, C};

/// Normalized `2^N` amplitude vector plus the post-selection success
/// probability (kept weight over total weight). A state that post-selects
/// to nothing is all zeros with `success_prob == 0`.
#[derive(Clone, Debug)]
pub struct QubitState<R: Real> {
    amplitudes: Vec<C<R>>,
    success_prob: R,
    n_qubits: usize,
}

impl<R: Real> QubitState<R> {
    pub fn from_amplitudes(amplitudes: Vec<C<R>>) -> Result<Self> {
        let n_qubits = amplitudes.len().trailing_zeros() as usize;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::Shape(format!(
                "amplitude vector length {} is not a power of two",
                amplitudes.len()
            )));
        }
        let norm_sqr: R = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr <= R::zero() {
            return Ok(QubitState { amplitudes, success_prob: R::zero(), n_qubits });
        }
        let inv = norm_sqr.sqrt().recip();
        let amplitudes =
            amplitudes.into_iter().map(|a| a * Complex::new(inv, R::zero())).collect();
        Ok(QubitState { amplitudes, success_prob: R::one(), n_qubits })
    }

    /// Internal constructor that trusts the caller about normalization.
    pub(crate) fn raw(amplitudes: Vec<C<R>>, success_prob: R, n_qubits: usize) -> Self {
        QubitState { amplitudes, success_prob, n_qubits }
    }

    /// Computational basis state |index>.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex::new(R::zero(), R::zero()); 1 << n_qubits];
        amplitudes[index] = Complex::new(R::one(), R::zero());
        QubitState { amplitudes, success_prob: R::one(), n_qubits }
    }

    /// `(|0...0> + e^{i gamma} |1...1>) / sqrt(2)`.
    pub fn ghz(n_qubits: usize, gamma: R) -> Self {
        let mut amplitudes = vec![Complex::new(R::zero(), R::zero()); 1 << n_qubits];
        let r = R::of(1.0 / std::f64::consts::SQRT_2);
        amplitudes[0] = Complex::new(r, R::zero());
        amplitudes[(1 << n_qubits) - 1] = Complex::from_polar(r, gamma);
        QubitState { amplitudes, success_prob: R::one(), n_qubits }
    }

    /// Tensor product; `self` supplies the high-order qubits.
    pub fn tensor(&self, other: &QubitState<R>) -> QubitState<R> {
        let n = self.n_qubits + other.n_qubits;
        let mut amplitudes = Vec::with_capacity(1 << n);
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        QubitState { amplitudes, success_prob: self.success_prob * other.success_prob, n_qubits: n }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C<R>] {
        &self.amplitudes
    }

    pub fn success_prob(&self) -> R {
        self.success_prob
    }

    pub fn norm_sqr(&self) -> R {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Re-embed as a Fock state with one photon per path (the inverse of
    /// post-selection on the logical subspace).
    pub fn to_fock(&self) -> FockState<R> {
        let n = self.n_qubits;
        let entries = self.amplitudes.iter().enumerate().filter(|(_, a)| {
            a.norm_sqr() > R::zero()
        }).map(|(idx, amp)| {
            let mut mono: FockMonomial = vec![0u8; 2 * n];
            for path in 0..n {
                let bit = (idx >> (n - 1 - path)) & 1;
                let pol = if bit == 1 { Pol::H } else { Pol::V };
                mono[OpticalMode { path, pol }.index()] = 1;
            }
            (mono, *amp)
        });
        FockState::from_terms(n, entries).expect("one photon per path by construction")
    }
}

/// Project onto the coincidence subspace and normalize.
///
/// `success_prob` is the kept weight divided by the total weighted norm;
/// states with no coincidence support return all zeros and probability 0
/// rather than an error.
pub fn postselect<R: Real>(state: &FockState<R>) -> QubitState<R> {
    let n = state.n_paths();
    let dim = 1usize << n;
    let mut kept = vec![Complex::new(R::zero(), R::zero()); dim];
    let total = state.norm_sqr();
    let mut kept_weight = R::zero();
    'terms: for (mono, amp) in state.terms() {
        let mut index = 0usize;
        for path in 0..n {
            let v = mono[OpticalMode { path, pol: Pol::V }.index()];
            let h = mono[OpticalMode { path, pol: Pol::H }.index()];
            if v + h != 1 {
                continue 'terms;
            }
            index = (index << 1) | h as usize;
        }
        kept[index] += *amp;
        kept_weight += amp.norm_sqr();
    }
    if total <= R::zero() || kept_weight <= R::zero() {
        return QubitState { amplitudes: kept, success_prob: R::zero(), n_qubits: n };
    }
    // the kept amplitudes may have interfered; renormalize from what is left
    let actual: R = kept.iter().map(|a| a.norm_sqr()).sum();
    if actual <= R::zero() {
        return QubitState {
            amplitudes: vec![Complex::new(R::zero(), R::zero()); dim],
            success_prob: R::zero(),
            n_qubits: n,
        };
    }
    let inv = actual.sqrt().recip();
    for a in kept.iter_mut() {
        *a *= Complex::new(inv, R::zero());
    }
    QubitState { amplitudes: kept, success_prob: actual / total, n_qubits: n }
}

/// `|<a|b>|^2`: squared overlap, invariant under a global phase on either
/// argument. Errors on dimension mismatch.
pub fn fidelity_up_to_phase<R: Real>(a: &QubitState<R>, b: &QubitState<R>) -> Result<R> {
    if a.amplitudes.len() != b.amplitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: a.amplitudes.len(),
            got: b.amplitudes.len(),
        });
    }
    let mut overlap = Complex::new(R::zero(), R::zero());
    for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
        overlap += x.conj() * y;
    }
    Ok(overlap.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::fock::{monomial, run_setup};
    use crate::optics::setup::OpticalSetup;

    #[test]
    fn ghz_from_figure_sequence() {
        let setup =
            OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d) -> R(b) -> PBS(b,c) -> R(c)").unwrap();
        let state = run_setup::<f64>(&setup).unwrap();
        let qubits = postselect(&state);
        assert!((qubits.success_prob() - 0.5).abs() < 1e-12);
        let minus_ghz = QubitState::from_amplitudes(vec![
            Complex::new(-1.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(-1.0, 0.0),
        ])
        .unwrap();
        let f = fidelity_up_to_phase(&qubits, &minus_ghz).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bunched_term_postselects_to_nothing() {
        let state = FockState::<f64>::from_terms(
            1,
            [(monomial(1, &[(0, Pol::V), (0, Pol::V)]), Complex::new(1.0, 0.0))],
        )
        .unwrap();
        let qubits = postselect(&state);
        assert_eq!(qubits.success_prob(), 0.0);
        assert!(qubits.amplitudes().iter().all(|a| a.norm_sqr() == 0.0));
    }

    #[test]
    fn hom_output_has_zero_success() {
        let setup = OpticalSetup::parse("DC00(a,b) -> BS(a,b)").unwrap();
        let state = run_setup::<f64>(&setup).unwrap();
        let qubits = postselect(&state);
        assert_eq!(qubits.success_prob(), 0.0);
    }

    #[test]
    fn fidelity_global_phase_invariance() {
        let a = QubitState::<f64>::ghz(3, 0.0);
        let phase = Complex::from_polar(1.0, std::f64::consts::PI / 3.0);
        let b = QubitState::from_amplitudes(
            a.amplitudes().iter().map(|x| x * phase).collect(),
        )
        .unwrap();
        assert!((fidelity_up_to_phase(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity_up_to_phase(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_vs_ghz_overlap_is_half() {
        let zero = QubitState::<f64>::basis(4, 0);
        let ghz = QubitState::<f64>::ghz(4, 0.0);
        let f = fidelity_up_to_phase(&zero, &ghz).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_dimension_mismatch_errors() {
        let a = QubitState::<f64>::ghz(3, 0.0);
        let b = QubitState::<f64>::ghz(4, 0.0);
        assert!(fidelity_up_to_phase(&a, &b).is_err());
    }

    #[test]
    fn postselect_is_idempotent_on_logical_states() {
        let setup =
            OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d) -> R(b) -> PBS(b,c) -> R(c)").unwrap();
        let qubits = postselect(&run_setup::<f64>(&setup).unwrap());
        let again = postselect(&qubits.to_fock());
        assert!((again.success_prob() - 1.0).abs() < 1e-12);
        let f = fidelity_up_to_phase(&qubits, &again).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn success_prob_stays_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let seq_tokens = ["BS(a,b)", "BS(c,d)", "PBS(b,c)", "HWP(a,0.25pi)", "R(d)"];
            let mut text = String::from("DCBell(a,b) -> DCBell(c,d)");
            for _ in 0..rng.random_range(0..6) {
                text.push_str(" -> ");
                text.push_str(seq_tokens[rng.random_range(0..seq_tokens.len())]);
            }
            let setup = OpticalSetup::parse(&text).unwrap();
            let q = postselect(&run_setup::<f64>(&setup).unwrap());
            let p = q.success_prob();
            assert!((0.0..=1.0 + 1e-12).contains(&p), "{text}: {p}");
        }
    }
}
