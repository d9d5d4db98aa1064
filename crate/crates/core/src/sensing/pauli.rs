//! Pauli words, encoding Hamiltonians, and measurement observables.
//!
//! Words are stored as X/Z bit masks in the symplectic convention
//! (`Y = i X Z` per site), which makes every word Hermitian with square
//! identity. Site `p` refers to path/qubit `p`; basis indices are
//! big-endian in path order, matching the post-selection layout.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// An N-site Pauli word with eigenvalues +-1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliWord {
    n: usize,
    x_mask: u64,
    z_mask: u64,
}

impl PauliWord {
    pub fn identity(n: usize) -> Self {
        PauliWord { n, x_mask: 0, z_mask: 0 }
    }

    /// Parse a word like `"XXIZ"`; site 0 (path `a`) is the leftmost letter.
    pub fn parse(word: &str) -> Result<Self> {
        let n = word.len();
        let mut out = PauliWord::identity(n);
        for (site, ch) in word.chars().enumerate() {
            match ch {
                'I' => {}
                'X' => out.x_mask |= out.site_bit(site),
                'Z' => out.z_mask |= out.site_bit(site),
                'Y' => {
                    out.x_mask |= out.site_bit(site);
                    out.z_mask |= out.site_bit(site);
                }
                other => {
                    return Err(Error::ParseDevice {
                        token: word.into(),
                        reason: format!("unknown Pauli letter `{other}`"),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn z_on(n: usize, site: usize) -> Self {
        let mut w = PauliWord::identity(n);
        w.z_mask = w.site_bit(site);
        w
    }

    pub fn x_on(n: usize, site: usize) -> Self {
        let mut w = PauliWord::identity(n);
        w.x_mask = w.site_bit(site);
        w
    }

    pub fn xx_on(n: usize, site_a: usize, site_b: usize) -> Self {
        let mut w = PauliWord::identity(n);
        w.x_mask = w.site_bit(site_a) | w.site_bit(site_b);
        w
    }

    /// All-X and all-Z product observables.
    pub fn product_x(n: usize) -> Self {
        PauliWord { n, x_mask: (1u64 << n) - 1, z_mask: 0 }
    }

    pub fn product_z(n: usize) -> Self {
        PauliWord { n, x_mask: 0, z_mask: (1u64 << n) - 1 }
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// Bit position of `site` within a basis index (big-endian by path).
    fn site_bit(&self, site: usize) -> u64 {
        debug_assert!(site < self.n);
        1u64 << (self.n - 1 - site)
    }

    pub fn commutes_with(&self, other: &PauliWord) -> bool {
        let anti = (self.x_mask & other.z_mask).count_ones()
            + (self.z_mask & other.x_mask).count_ones();
        anti % 2 == 0
    }

    /// Apply the word to an amplitude vector:
    /// `out[b ^ x] += i^{#Y} (-1)^{popcount(b & z)} v[b]`.
    pub fn apply<R: Real>(&self, amps: &[C<R>]) -> Vec<C<R>> {
        let dim = amps.len();
        debug_assert_eq!(dim, 1 << self.n);
        let n_y = (self.x_mask & self.z_mask).count_ones();
        let y_phase: C<R> = match n_y % 4 {
            0 => Complex::new(R::one(), R::zero()),
            1 => Complex::new(R::zero(), R::one()),
            2 => Complex::new(-R::one(), R::zero()),
            _ => Complex::new(R::zero(), -R::one()),
        };
        let mut out = vec![Complex::new(R::zero(), R::zero()); dim];
        for (b, amp) in amps.iter().enumerate() {
            if amp.norm_sqr() == R::zero() {
                continue;
            }
            let sign = ((b as u64) & self.z_mask).count_ones() % 2;
            let mut value = *amp * y_phase;
            if sign == 1 {
                value = -value;
            }
            out[b ^ self.x_mask as usize] += value;
        }
        out
    }
}

/// Named Hamiltonian presets used across the pipeline and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianKind {
    SumZ,
    SumX,
    XxPairs,
}

impl HamiltonianKind {
    pub fn tag(self) -> &'static str {
        match self {
            HamiltonianKind::SumZ => "sumZ",
            HamiltonianKind::SumX => "sumX",
            HamiltonianKind::XxPairs => "xxPairs",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sumZ" => Ok(HamiltonianKind::SumZ),
            "sumX" => Ok(HamiltonianKind::SumX),
            "xxPairs" => Ok(HamiltonianKind::XxPairs),
            other => Err(Error::ParseDevice {
                token: other.into(),
                reason: "expected one of sumZ, sumX, xxPairs".into(),
            }),
        }
    }

    pub fn build(self, n: usize) -> Hamiltonian {
        match self {
            HamiltonianKind::SumZ => {
                Hamiltonian::new((0..n).map(|i| PauliWord::z_on(n, i)).collect()).unwrap()
            }
            HamiltonianKind::SumX => {
                Hamiltonian::new((0..n).map(|i| PauliWord::x_on(n, i)).collect()).unwrap()
            }
            HamiltonianKind::XxPairs => {
                let mut terms = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        terms.push(PauliWord::xx_on(n, i, j));
                    }
                }
                Hamiltonian::new(terms).unwrap()
            }
        }
    }

    /// Default interpolation degree: half the spectral span of `H` (the
    /// generator is `H/2`, and response frequencies are generator-eigenvalue
    /// differences). For the sum presets this is `N`; for the pair
    /// interaction the span of `(S^2 - N)/2` over `S in {-N..N}` gives
    /// `N^2 / 4`.
    pub fn default_degree(self, n: usize) -> usize {
        match self {
            HamiltonianKind::SumZ | HamiltonianKind::SumX => n,
            HamiltonianKind::XxPairs => (n * n).div_ceil(4),
        }
    }
}

/// A sum of mutually commuting Pauli words, each squaring to the identity.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    terms: Vec<PauliWord>,
    n: usize,
}

impl Hamiltonian {
    pub fn new(terms: Vec<PauliWord>) -> Result<Self> {
        let n = terms.first().map(|t| t.n_sites()).unwrap_or(0);
        for (i, a) in terms.iter().enumerate() {
            if a.n_sites() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.n_sites() });
            }
            for b in terms.iter().skip(i + 1) {
                if !a.commutes_with(b) {
                    return Err(Error::NonCommuting);
                }
            }
        }
        Ok(Hamiltonian { terms, n })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PauliWord] {
        &self.terms
    }

    /// `H |psi>` as a fresh amplitude vector.
    pub fn apply<R: Real>(&self, amps: &[C<R>]) -> Vec<C<R>> {
        let mut out = vec![Complex::new(R::zero(), R::zero()); amps.len()];
        for term in &self.terms {
            for (slot, v) in out.iter_mut().zip(term.apply(amps)) {
                *slot += v;
            }
        }
        out
    }
}

/// Measurement observable: one Pauli word (so `O^2 = I`, `||O||_inf = 1`).
#[derive(Clone, Copy, Debug)]
pub struct Observable(pub PauliWord);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservableKind {
    ProdX,
    ProdZ,
}

impl ObservableKind {
    pub fn tag(self) -> &'static str {
        match self {
            ObservableKind::ProdX => "prodX",
            ObservableKind::ProdZ => "prodZ",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "prodX" => Ok(ObservableKind::ProdX),
            "prodZ" => Ok(ObservableKind::ProdZ),
            other => Err(Error::ParseDevice {
                token: other.into(),
                reason: "expected one of prodX, prodZ".into(),
            }),
        }
    }

    pub fn build(self, n: usize) -> Observable {
        match self {
            ObservableKind::ProdX => Observable(PauliWord::product_x(n)),
            ObservableKind::ProdZ => Observable(PauliWord::product_z(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_apply_single_letters() {
        let z = PauliWord::parse("ZI").unwrap();
        let amps: Vec<C<f64>> = vec![
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
        ];
        let out = z.apply(&amps);
        // site 0 is the high bit: |10> picks up the minus sign
        assert_eq!(out[0], Complex::new(1.0, 0.0));
        assert_eq!(out[2], Complex::new(-1.0, 0.0));
    }

    #[test]
    fn y_is_ixz() {
        let y = PauliWord::parse("Y").unwrap();
        let amps: Vec<C<f64>> = vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)];
        let out = y.apply(&amps);
        assert_eq!(out[1], Complex::new(0.0, 1.0));
        let back = y.apply(&out);
        // Y^2 = I
        assert_eq!(back[0], Complex::new(1.0, 0.0));
        assert_eq!(back[1], Complex::new(0.0, 0.0));
    }

    #[test]
    fn words_square_to_identity() {
        for word in ["XZYX", "YYYY", "IZXI"] {
            let p = PauliWord::parse(word).unwrap();
            let mut amps: Vec<C<f64>> = (0..16)
                .map(|k| Complex::new(0.1 * k as f64, 0.05 * (16 - k) as f64))
                .collect();
            let twice = p.apply(&p.apply(&amps));
            for (a, b) in amps.iter_mut().zip(twice) {
                assert!((*a - b).norm() < 1e-12, "{word}");
            }
        }
    }

    #[test]
    fn commutation_detection() {
        let x = PauliWord::parse("X").unwrap();
        let z = PauliWord::parse("Z").unwrap();
        assert!(!x.commutes_with(&z));
        let xx = PauliWord::parse("XX").unwrap();
        let zz = PauliWord::parse("ZZ").unwrap();
        assert!(xx.commutes_with(&zz));
        assert!(Hamiltonian::new(vec![x, z]).is_err());
    }

    #[test]
    fn presets_have_expected_term_counts() {
        assert_eq!(HamiltonianKind::SumZ.build(8).terms().len(), 8);
        assert_eq!(HamiltonianKind::XxPairs.build(4).terms().len(), 6);
        assert_eq!(HamiltonianKind::SumZ.default_degree(8), 8);
        assert_eq!(HamiltonianKind::XxPairs.default_degree(4), 4);
    }
}
