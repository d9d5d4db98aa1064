//! Dense row-major matrices backing the tape kernel.

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<R: Real> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![R::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: R) {
        self.data[i * self.cols + j] = v;
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Matrix<R> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// `A (M x K) * B (K x N)`, cache-friendly i-k-j loops with the k loop
/// unrolled by four so each pass over the output row does four
/// multiply-adds per load/store.
pub fn matmul<R: Real>(a: &Matrix<R>, b: &Matrix<R>) -> Matrix<R> {
    assert_eq!(a.cols, b.rows, "matmul shapes {}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols);
    let n = b.cols;
    let k_dim = a.cols;
    let mut out = Matrix::zeros(a.rows, n);
    let k_blocks = k_dim / 4 * 4;
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        let mut k = 0;
        while k < k_blocks {
            let (a0, a1, a2, a3) = (a_row[k], a_row[k + 1], a_row[k + 2], a_row[k + 3]);
            if a0 == R::zero() && a1 == R::zero() && a2 == R::zero() && a3 == R::zero() {
                k += 4;
                continue;
            }
            let b0 = &b.data[k * n..(k + 1) * n];
            let b1 = &b.data[(k + 1) * n..(k + 2) * n];
            let b2 = &b.data[(k + 2) * n..(k + 3) * n];
            let b3 = &b.data[(k + 3) * n..(k + 4) * n];
            for j in 0..n {
                out_row[j] = out_row[j] + a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
            k += 4;
        }
        for (k, &aik) in a_row.iter().enumerate().skip(k_blocks) {
            if aik == R::zero() {
                continue;
            }
            let b_row = &b.data[k * n..(k + 1) * n];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    out
}

pub fn transpose<R: Real>(a: &Matrix<R>) -> Matrix<R> {
    let mut out = Matrix::zeros(a.cols, a.rows);
    for i in 0..a.rows {
        for (j, &v) in a.row(i).iter().enumerate() {
            out.data[j * a.rows + i] = v;
        }
    }
    out
}

/// `A (M x J) * B^T` where `B` is `(K x J)`. Materializes `B^T` so the
/// product runs through the streaming i-k-j kernel instead of
/// latency-bound row dots; `B` is small (a weight matrix) in every caller.
pub fn matmul_bt<R: Real>(a: &Matrix<R>, b: &Matrix<R>) -> Matrix<R> {
    assert_eq!(a.cols, b.cols, "matmul_bt shapes");
    matmul(a, &transpose(b))
}

/// `A^T (K x M)^T ... * B`: for `A (M x K)`, `B (M x J)` computes `A^T B`.
pub fn matmul_at<R: Real>(a: &Matrix<R>, b: &Matrix<R>) -> Matrix<R> {
    assert_eq!(a.rows, b.rows, "matmul_at shapes");
    let mut out = Matrix::zeros(a.cols, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let b_row = b.row(i);
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == R::zero() {
                continue;
            }
            let out_row = &mut out.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bij) in out_row.iter_mut().zip(b_row) {
                *o += aik * bij;
            }
        }
    }
    out
}

/// Dot product with eight independent accumulators so the reduction is not
/// serialized on floating-point add latency (and can vectorize).
pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut acc = [R::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let i = c * 8;
        let (xa, xb) = (&a[i..i + 8], &b[i..i + 8]);
        for lane in 0..8 {
            acc[lane] = acc[lane] + xa[lane] * xb[lane];
        }
    }
    let mut total = ((acc[0] + acc[1]) + (acc[2] + acc[3]))
        + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for i in chunks * 8..a.len() {
        total += a[i] * b[i];
    }
    total
}

pub fn axpy<R: Real>(alpha: R, x: &[R], y: &mut [R]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_agrees_with_naive() {
        let a = Matrix::<f64>::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transposed_variants_agree() {
        let a = Matrix::<f64>::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 5.0, -6.0]);
        let b = Matrix::from_vec(4, 3, vec![1.0, 0.0, 2.0, -1.0, 3.0, 1.0, 0.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        // a * b^T vs naive
        let c = matmul_bt(&a, &b);
        for i in 0..2 {
            for k in 0..4 {
                let expect = dot(a.row(i), b.row(k));
                assert!((c.get(i, k) - expect).abs() < 1e-12);
            }
        }
        let d = Matrix::from_vec(2, 4, (0..8).map(|x| x as f64).collect());
        let e = matmul_at(&a, &d); // (3 x 4)
        for k in 0..3 {
            for j in 0..4 {
                let mut expect = 0.0;
                for i in 0..2 {
                    expect += a.get(i, k) * d.get(i, j);
                }
                assert!((e.get(k, j) - expect).abs() < 1e-12);
            }
        }
    }
}
