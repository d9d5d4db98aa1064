//! Trigonometric polynomials, interpolation at uniform nodes, inverse
//! readout, and the sensitivity formula.
//!
//! A degree-`n` response is fitted from exactly `2n + 1` readings at
//! `theta_k = 2 pi (k - 1) / (2n + 1)` using discrete orthogonality, which
//! is exact (to rounding) for any response of degree at most `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `R(theta) = c + sum_s a_s cos(s theta) + b_s sin(s theta)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrigPoly<R: Real> {
    pub constant: R,
    pub cos_coeffs: Vec<R>,
    pub sin_coeffs: Vec<R>,
}

impl<R: Real> TrigPoly<R> {
    pub fn constant(value: R) -> Self {
        TrigPoly { constant: value, cos_coeffs: Vec::new(), sin_coeffs: Vec::new() }
    }

    /// `cos(n theta + gamma)` expressed in coefficient form.
    pub fn cosine(degree: usize, gamma: R) -> Self {
        let mut poly = TrigPoly {
            constant: R::zero(),
            cos_coeffs: vec![R::zero(); degree],
            sin_coeffs: vec![R::zero(); degree],
        };
        poly.cos_coeffs[degree - 1] = gamma.cos();
        poly.sin_coeffs[degree - 1] = -gamma.sin();
        poly
    }

    pub fn degree(&self) -> usize {
        self.cos_coeffs.len()
    }

    pub fn eval(&self, theta: R) -> R {
        let mut value = self.constant;
        for (s, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let st = theta * R::of((s + 1) as f64);
            value += *a * st.cos() + *b * st.sin();
        }
        value
    }

    pub fn deriv(&self, theta: R) -> R {
        let mut value = R::zero();
        for (s, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let k = R::of((s + 1) as f64);
            let st = theta * k;
            value += k * (*b * st.cos() - *a * st.sin());
        }
        value
    }
}

/// The `2n + 1` uniform interpolation nodes in `[0, 2 pi)`.
pub fn uniform_nodes<R: Real>(degree: usize) -> Vec<R> {
    let count = 2 * degree + 1;
    (0..count).map(|k| R::of(2.0 * std::f64::consts::PI * k as f64 / count as f64)).collect()
}

/// Fit a degree-`n` polynomial from readings at the uniform nodes by
/// discrete orthogonality:
/// `c = mean(R_k)`, `a_s = 2/(2n+1) sum_k R_k cos(s theta_k)`, likewise for
/// `b_s` with sines.
pub fn fit_trig<R: Real>(readings: &[R], degree: usize) -> Result<TrigPoly<R>> {
    let count = 2 * degree + 1;
    if readings.len() != count {
        return Err(Error::ReadingCount { expected: count, got: readings.len() });
    }
    let nodes = uniform_nodes::<R>(degree);
    let inv = R::of(1.0 / count as f64);
    let two_inv = R::of(2.0 / count as f64);
    let constant = readings.iter().copied().sum::<R>() * inv;
    let mut cos_coeffs = Vec::with_capacity(degree);
    let mut sin_coeffs = Vec::with_capacity(degree);
    for s in 1..=degree {
        let k = R::of(s as f64);
        let mut a = R::zero();
        let mut b = R::zero();
        for (reading, node) in readings.iter().zip(&nodes) {
            let st = *node * k;
            a += *reading * st.cos();
            b += *reading * st.sin();
        }
        cos_coeffs.push(a * two_inv);
        sin_coeffs.push(b * two_inv);
    }
    Ok(TrigPoly { constant, cos_coeffs, sin_coeffs })
}

/// A candidate estimate from inverting the fitted response.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThetaCandidate<R: Real> {
    pub theta: R,
    pub residual: R,
}

/// Default scan resolution for [`infer_theta`]: `2^14` grid points.
pub const INFER_GRID_BITS: u32 = 14;

/// All near-global minimizers of `|poly(theta) - reading|` over one period.
///
/// Scans a dense grid, refines each local minimum by golden-section search,
/// and keeps every candidate whose residual is within `1e-6` of the global
/// minimum, sorted by residual then angle.
pub fn infer_theta<R: Real>(poly: &TrigPoly<R>, reading: R) -> Vec<ThetaCandidate<R>> {
    let grid = 1usize << INFER_GRID_BITS;
    let tau = R::of(2.0 * std::f64::consts::PI);
    let step = tau / R::of(grid as f64);
    let residual = |theta: R| (poly.eval(theta) - reading).abs();
    let values: Vec<R> = (0..grid).map(|i| residual(step * R::of(i as f64))).collect();
    let mut candidates: Vec<ThetaCandidate<R>> = Vec::new();
    for i in 0..grid {
        let prev = values[(i + grid - 1) % grid];
        let next = values[(i + 1) % grid];
        // strict on one side so flat plateaus yield a single representative
        if values[i] <= prev && values[i] < next {
            let center = step * R::of(i as f64);
            let (theta, res) = golden_section(&residual, center - step, center + step);
            let theta = if theta < R::zero() { theta + tau } else { theta };
            let theta = if theta >= tau { theta - tau } else { theta };
            candidates.push(ThetaCandidate { theta, residual: res });
        }
    }
    if candidates.is_empty() {
        // perfectly flat residual (constant poly matching the reading)
        candidates.push(ThetaCandidate { theta: R::zero(), residual: values[0] });
    }
    let best = candidates.iter().map(|c| c.residual).fold(R::infinity(), R::min);
    let tol = R::of(1e-6);
    let mut kept: Vec<ThetaCandidate<R>> =
        candidates.into_iter().filter(|c| c.residual <= best + tol).collect();
    kept.sort_by(|x, y| {
        (x.residual, x.theta).partial_cmp(&(y.residual, y.theta)).expect("finite residuals")
    });
    // merge refinements that converged to the same angle
    let min_sep = step * R::of(0.5);
    kept.dedup_by(|a, b| (a.theta - b.theta).abs() < min_sep);
    kept
}

fn golden_section<R: Real>(f: &impl Fn(R) -> R, mut lo: R, mut hi: R) -> (R, R) {
    let inv_phi = R::of(0.618_033_988_749_894_9);
    let mut x1 = hi - (hi - lo) * inv_phi;
    let mut x2 = lo + (hi - lo) * inv_phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * inv_phi;
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * inv_phi;
            f2 = f(x2);
        }
    }
    let mid = (lo + hi) * R::of(0.5);
    (mid, f(mid))
}

/// Default slope floor below which the sensitivity diverges.
pub const SLOPE_FLOOR: f64 = 1e-9;

/// Single-shot sensitivity `(1 - R(theta)^2) / R'(theta)^2`, with an
/// infinity sentinel where the slope is below `floor`. The numerator is
/// clamped at zero for fitted responses that slightly exceed +-1.
pub fn sensitivity<R: Real>(poly: &TrigPoly<R>, theta: R, floor: R) -> R {
    let slope = poly.deriv(theta);
    if slope.abs() <= floor {
        return R::infinity();
    }
    let value = poly.eval(theta);
    (R::one() - value * value).max(R::zero()) / (slope * slope)
}
