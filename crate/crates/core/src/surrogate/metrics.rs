//! Ranking metrics.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Average ranks with ties sharing the mean of their positions (1-based).
pub fn average_ranks<R: Real>(values: &[R]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("comparable values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of tie-averaged ranks.
pub fn spearman<R: Real>(a: &[R], b: &[R]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::Shape("spearman needs at least two samples".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let mean_a = ra.iter().sum::<f64>() / n;
    let mean_b = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    let denom = (var_a * var_b).sqrt();
    if denom == 0.0 {
        // one side is constant; correlation is undefined, report 0
        return Ok(0.0);
    }
    Ok(cov / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) rank definition: rank = #smaller + (#equal + 1) / 2.
    fn ranks_by_counting(values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&x| {
                let smaller = values.iter().filter(|&&y| y < x).count() as f64;
                let equal = values.iter().filter(|&&y| y == x).count() as f64;
                smaller + (equal + 1.0) / 2.0
            })
            .collect()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn identical_orderings_give_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [10.0, 20.0, 30.0, 40.0];
        assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_orderings_give_minus_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &b).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_match_brute_force_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            // draw from a tiny value set so ties are common
            let a: Vec<f64> = (0..10).map(|_| (rng.random_range(0..4)) as f64).collect();
            let b: Vec<f64> = (0..10).map(|_| (rng.random_range(0..4)) as f64).collect();
            let fast = spearman(&a, &b).unwrap();
            let brute = {
                let ra = ranks_by_counting(&a);
                let rb = ranks_by_counting(&b);
                if ra.iter().all(|&x| x == ra[0]) || rb.iter().all(|&x| x == rb[0]) {
                    0.0
                } else {
                    pearson(&ra, &rb)
                }
            };
            assert!((fast - brute).abs() < 1e-12, "{a:?} {b:?}: {fast} vs {brute}");
        }
    }

    #[test]
    fn invariant_under_increasing_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let base = spearman(&a, &b).unwrap();
        let fa: Vec<f64> = a.iter().map(|x| (3.0 * x + 1.0).exp()).collect();
        assert!((spearman(&fa, &b).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn short_input_rejected() {
        assert!(spearman(&[1.0], &[2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[0.5, 0.7]).is_ok());
    }
}
