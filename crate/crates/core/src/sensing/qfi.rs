//! Quantum Fisher information for pure probes and density matrices.
//!
//! With the channel generator fixed at `G = H / 2`, the pure-state QFI is
//! `4 Var(G) = <H^2> - <H>^2`. The mixed-state form eigendecomposes the
//! density matrix and sums `2 (b_i - b_j)^2 / (b_i + b_j) |<i| G |j>|^2`
//! over eigenpairs with non-vanishing weight.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::optics::QubitState;
use crate::scalar::{Real, C};
use crate::sensing::pauli::Hamiltonian;

/// Dense complex square matrix, row-major. Used for density operators and
/// the Hermitian eigensolver.
#[derive(Clone, Debug)]
pub struct CMatrix<R: Real> {
    pub dim: usize,
    pub data: Vec<C<R>>,
}

impl<R: Real> CMatrix<R> {
    pub fn zeros(dim: usize) -> Self {
        CMatrix { dim, data: vec![Complex::new(R::zero(), R::zero()); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex::new(R::one(), R::zero());
        }
        m
    }

    /// `|psi><psi|`.
    pub fn projector(state: &QubitState<R>) -> Self {
        let dim = state.amplitudes().len();
        let mut m = CMatrix::zeros(dim);
        for (i, a) in state.amplitudes().iter().enumerate() {
            for (j, b) in state.amplitudes().iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C<R> {
        (0..self.dim).map(|i| self[(i, i)]).fold(Complex::new(R::zero(), R::zero()), |s, v| s + v)
    }

    pub fn is_hermitian(&self, tol: R) -> bool {
        for i in 0..self.dim {
            for j in i..self.dim {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl<R: Real> std::ops::Index<(usize, usize)> for CMatrix<R> {
    type Output = C<R>;
    fn index(&self, (i, j): (usize, usize)) -> &C<R> {
        &self.data[i * self.dim + j]
    }
}

impl<R: Real> std::ops::IndexMut<(usize, usize)> for CMatrix<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<R> {
        let d = self.dim;
        &mut self.data[i * d + j]
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues and the unitary whose columns are the
/// corresponding eigenvectors.
pub fn hermitian_eigen<R: Real>(matrix: &CMatrix<R>) -> (Vec<R>, CMatrix<R>) {
    let n = matrix.dim;
    let mut a = matrix.clone();
    let mut v = CMatrix::identity(n);
    let tol = R::of(1e-14);
    let scale = a.data.iter().map(|x| x.norm_sqr()).sum::<R>().sqrt().max(R::one());
    for _sweep in 0..60 {
        let mut off = R::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < tol * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= tol * scale {
                    continue;
                }
                // unitary 2x2 rotation eliminating a[(p, q)]
                let phase = apq / Complex::new(mag, R::zero());
                let tau = (a[(q, q)].re - a[(p, p)].re) / (R::of(2.0) * mag);
                let t = {
                    let sign = if tau >= R::zero() { R::one() } else { -R::one() };
                    sign / (tau.abs() + (R::one() + tau * tau).sqrt())
                };
                let c = (R::one() + t * t).sqrt().recip();
                let s = t * c;
                // column rotation: [p, q] -> [c p - s phi* q, s phi p + c q]
                let cs = Complex::new(c, R::zero());
                let s_phase = phase * Complex::new(s, R::zero());
                let s_phase_conj = s_phase.conj();
                for row in 0..n {
                    let xp = a[(row, p)];
                    let xq = a[(row, q)];
                    a[(row, p)] = cs * xp - s_phase_conj * xq;
                    a[(row, q)] = s_phase * xp + cs * xq;
                }
                for col in 0..n {
                    let xp = a[(p, col)];
                    let xq = a[(q, col)];
                    a[(p, col)] = cs * xp - s_phase * xq;
                    a[(q, col)] = s_phase_conj * xp + cs * xq;
                }
                for row in 0..n {
                    let xp = v[(row, p)];
                    let xq = v[(row, q)];
                    v[(row, p)] = cs * xp - s_phase_conj * xq;
                    v[(row, q)] = s_phase * xp + cs * xq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[(i, i)].re).collect();
    (eigenvalues, v)
}

/// Pure-state QFI: the variance of `H` in the probe, `<H^2> - <H>^2`.
pub fn qfi_pure<R: Real>(state: &QubitState<R>, h: &Hamiltonian) -> Result<R> {
    if state.n_qubits() != h.n_sites() {
        return Err(Error::DimensionMismatch { expected: h.n_sites(), got: state.n_qubits() });
    }
    let h_psi = h.apply(state.amplitudes());
    let mut h_sq = R::zero();
    let mut h_mean = Complex::new(R::zero(), R::zero());
    for (a, b) in state.amplitudes().iter().zip(&h_psi) {
        h_sq += b.norm_sqr();
        h_mean += a.conj() * b;
    }
    Ok(h_sq - h_mean.norm_sqr())
}

/// Mixed-state QFI from the spectral form. Pairs whose weights sum below
/// `1e-12` are skipped; eigenvalues within the PSD tolerance of zero are
/// clamped.
pub fn qfi_mixed<R: Real>(rho: &CMatrix<R>, h: &Hamiltonian) -> Result<R> {
    let dim = rho.dim;
    if dim != 1 << h.n_sites() {
        return Err(Error::DimensionMismatch { expected: 1 << h.n_sites(), got: dim });
    }
    if !rho.is_hermitian(R::of(1e-9)) {
        return Err(Error::NotHermitian);
    }
    let trace = rho.trace();
    if (trace.re - R::one()).abs() > R::of(1e-9) || trace.im.abs() > R::of(1e-9) {
        return Err(Error::NotUnitTrace(trace.re.to_f64_lossy()));
    }
    let (mut eigenvalues, vectors) = hermitian_eigen(rho);
    for b in eigenvalues.iter_mut() {
        if *b < R::zero() {
            if *b < -R::of(1e-9) {
                return Err(Error::NotHermitian);
            }
            *b = R::zero();
        }
    }
    // G |phi_j> for every eigenvector, with G = H / 2
    let half = Complex::new(R::of(0.5), R::zero());
    let mut g_columns: Vec<Vec<C<R>>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let col: Vec<C<R>> = (0..dim).map(|row| vectors[(row, j)]).collect();
        g_columns.push(h.apply(&col).into_iter().map(|x| x * half).collect());
    }
    let mut total = R::zero();
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            let denom = eigenvalues[i] + eigenvalues[j];
            if denom < R::of(1e-12) {
                continue;
            }
            let mut elem = Complex::new(R::zero(), R::zero());
            for row in 0..dim {
                elem += vectors[(row, i)].conj() * g_columns[j][row];
            }
            let diff = eigenvalues[i] - eigenvalues[j];
            total += R::of(2.0) * diff * diff / denom * elem.norm_sqr();
        }
    }
    Ok(total)
}
