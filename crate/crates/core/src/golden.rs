//! Reference eight-photon sequences and the states they should prepare.
//!
//! The four candidate setups below come with externally stated final
//! states and QFI values. Simulating them is the strongest end-to-end check
//! of the device semantics: all four QFIs must come out exactly, and the
//! first two states match the stated amplitudes bit for bit.
//!
//! The stated states for `candidate-3` and `train-best` are *not*
//! reachable under the device toolbox as defined: their own wave-plate
//! matrices force different relative phases between the all-V and all-H
//! source branches than the stated product forms carry (the amplitude
//! magnitudes, the product structure up to local phases, and the QFI all
//! still agree). `check_candidates` reports the measured fidelity so
//! callers can see exactly how far each stated state is.

use num_complex::Complex;

use crate::error::Result;
use crate::optics::{fidelity_up_to_phase, postselect, run_setup, OpticalSetup, QubitState};
use crate::scalar::Real;
use crate::sensing::pauli::HamiltonianKind;
use crate::sensing::qfi_pure;

/// One reference sequence with its stated outcome.
pub struct GoldenCandidate {
    pub name: &'static str,
    pub setup_text: &'static str,
    /// Stated post-selected state as (basis index, unnormalized amplitude).
    pub stated_amplitudes: Vec<(usize, Complex<f64>)>,
    pub expected_qfi: f64,
}

/// Outcome of simulating one golden candidate.
#[derive(Clone, Debug)]
pub struct GoldenResult {
    pub name: &'static str,
    pub qfi: f64,
    pub expected_qfi: f64,
    pub fidelity_to_stated: f64,
    pub success_prob: f64,
}

impl GoldenResult {
    pub fn qfi_ok(&self) -> bool {
        (self.qfi - self.expected_qfi).abs() <= 1e-9
    }

    pub fn state_ok(&self) -> bool {
        self.fidelity_to_stated >= 1.0 - 1e-9
    }
}

fn bits(pattern: &str) -> usize {
    usize::from_str_radix(pattern, 2).expect("binary basis pattern")
}

/// The four reference candidates: three found in testing plus the best
/// training example. All use Bell sources on consecutive pairs a..h.
pub fn candidates() -> Vec<GoldenCandidate> {
    let c = |re: f64, im: f64| Complex::new(re, im);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        GoldenCandidate {
            name: "candidate-1",
            setup_text: "DCBell(a,b) -> DCBell(c,d) -> DCBell(e,f) -> DCBell(g,h) -> \
                         PBS(b,c) -> PBS(a,g) -> QWP(h,0.5pi) -> PBS(d,f) -> PBS(c,h) -> \
                         R(d) -> PBS(e,f) -> HWP(a,0.5pi)",
            // ((1 - i)|0^8> + (1 + i)|1^8>) / 2
            stated_amplitudes: vec![
                (bits("00000000"), c(1.0, -1.0)),
                (bits("11111111"), c(1.0, 1.0)),
            ],
            expected_qfi: 64.0,
        },
        GoldenCandidate {
            name: "candidate-2",
            setup_text: "DCBell(a,b) -> DCBell(c,d) -> DCBell(e,f) -> DCBell(g,h) -> \
                         PBS(a,g) -> R(c) -> PBS(b,c) -> PBS(a,g) -> PBS(g,f) -> \
                         HWP(g,0.5pi) -> HWP(d,0.5pi) -> HWP(c,1pi) -> R(b) -> \
                         HWP(h,1pi) -> QWP(a,1pi)",
            // ((-1 + i)/sqrt(2)) (|0^4> + i |1^4>) (|0^4> + |1^4>)
            stated_amplitudes: vec![
                (bits("00000000"), c(-s, s)),
                (bits("00001111"), c(-s, s)),
                (bits("11110000"), c(-s, s) * c(0.0, 1.0)),
                (bits("11111111"), c(-s, s) * c(0.0, 1.0)),
            ],
            expected_qfi: 32.0,
        },
        GoldenCandidate {
            name: "candidate-3",
            setup_text: "DCBell(a,b) -> DCBell(c,d) -> DCBell(e,f) -> DCBell(g,h) -> \
                         PBS(f,d) -> R(a) -> PBS(a,e) -> QWP(b,0.25pi) -> PBS(h,a)",
            // (i|0>_b + |1>_b)(|0^7> + |1^7>); path b is bit 6
            stated_amplitudes: vec![
                (bits("00000000"), c(0.0, 1.0)),
                (bits("01000000"), c(1.0, 0.0)),
                (bits("10111111"), c(0.0, 1.0)),
                (bits("11111111"), c(1.0, 0.0)),
            ],
            expected_qfi: 50.0,
        },
        GoldenCandidate {
            name: "train-best",
            setup_text: "DCBell(a,b) -> DCBell(c,d) -> DCBell(e,f) -> DCBell(g,h) -> \
                         R(b) -> PBS(f,h) -> QWP(h,0.75pi) -> QWP(f,1pi) -> PBS(d,h) -> \
                         QWP(e,0.5pi) -> R(c) -> PBS(c,f) -> R(f) -> PBS(b,g) -> \
                         QWP(g,0.75pi) -> R(c) -> HWP(h,5pi)",
            // ((1-i)/sqrt(2) |0>_g + (i-1)/sqrt(2) |1>_g)(|0^7> + |1^7>); g is bit 1
            stated_amplitudes: vec![
                (bits("00000000"), c(s, -s)),
                (bits("00000010"), c(-s, s)),
                (bits("11111101"), c(s, -s)),
                (bits("11111111"), c(-s, s)),
            ],
            expected_qfi: 50.0,
        },
    ]
}

/// The four-photon GHZ construction: two Bell sources, then
/// `R(b) -> PBS(b,c) -> R(c)`.
pub fn ghz4_setup() -> OpticalSetup {
    OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d) -> R(b) -> PBS(b,c) -> R(c)")
        .expect("static setup")
}

/// Source-only probe of `n/2` Bell pairs (the classically correlated
/// baseline with QFI `2N`).
pub fn bell_pairs_setup(n_photons: usize) -> OpticalSetup {
    OpticalSetup::with_bell_sources(n_photons, Vec::new()).expect("static setup")
}

fn stated_state<R: Real>(entries: &[(usize, Complex<f64>)], n: usize) -> QubitState<R> {
    let mut amps = vec![Complex::new(R::zero(), R::zero()); 1 << n];
    for (idx, amp) in entries {
        amps[*idx] = Complex::new(R::of(amp.re), R::of(amp.im));
    }
    QubitState::from_amplitudes(amps).expect("stated state")
}

/// Simulate every golden candidate and compare against its stated outcome.
pub fn check_candidates<R: Real>() -> Result<Vec<GoldenResult>> {
    let h = HamiltonianKind::SumZ.build(8);
    candidates()
        .into_iter()
        .map(|candidate| {
            let setup = OpticalSetup::parse(candidate.setup_text)?;
            let probe = postselect(&run_setup::<R>(&setup)?);
            let stated = stated_state::<R>(&candidate.stated_amplitudes, 8);
            let qfi = qfi_pure(&probe, &h)?;
            let fidelity = fidelity_up_to_phase(&stated, &probe)?;
            Ok(GoldenResult {
                name: candidate.name,
                qfi: qfi.to_f64_lossy(),
                expected_qfi: candidate.expected_qfi,
                fidelity_to_stated: fidelity.to_f64_lossy(),
                success_prob: probe.success_prob().to_f64_lossy(),
            })
        })
        .collect()
}
