//! Minimal reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is rebuilt per forward pass: each operation appends a node
//! holding its result plus whatever it saved for the backward sweep.
//! Gradients are exact for the recorded computation; the max-pool routes
//! its gradient to the argmax element with ties broken toward the lowest
//! row index.

use std::rc::Rc;

use crate::scalar::Real;
use crate::surrogate::tensor::{axpy, dot, matmul, matmul_at, matmul_bt, Matrix};

/// Compressed sparse neighbor lists: `cols[row_ptr[i]..row_ptr[i+1]]` are
/// the attention targets of node `i` (successors plus the node itself).
#[derive(Clone, Debug)]
pub struct Csr {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Csr {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}

/// Node-range segments `(start, len)` of each graph in a batch.
pub type Segments = Rc<Vec<(usize, usize)>>;

enum Op<R: Real> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `a (M x C) + row (1 x C)` broadcast over rows.
    AddRow(usize, usize),
    /// `col (M x 1) * b (M x C)` broadcast over columns.
    MulCol(usize, usize),
    Gelu(usize, Matrix<R>),
    Sigmoid(usize),
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        /// Per-column mean/variance actually used (batch or frozen).
        mean: Vec<R>,
        inv_std: Vec<R>,
        var: Vec<R>,
        /// Saved normalized input.
        xhat: Matrix<R>,
        /// Frozen statistics are constants for the backward pass.
        frozen: bool,
    },
    ConcatCols(Vec<usize>),
    /// Column window `[start, start + width)` of the input.
    SliceCols {
        x: usize,
        start: usize,
        width: usize,
    },
    Attention {
        q: usize,
        k: usize,
        v: usize,
        csr: Rc<Csr>,
        /// Softmax weights per CSR edge.
        alpha: Vec<R>,
        inv_scale: R,
    },
    MaxPoolSegments {
        x: usize,
        segments: Segments,
        /// Winning global row per (segment, column).
        argmax: Vec<usize>,
    },
    MeanAll(usize),
}

struct Node<R: Real> {
    op: Op<R>,
    value: Matrix<R>,
}

pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
}


impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, id: usize) -> &Matrix<R> {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op<R>, value: Matrix<R>) -> usize {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: Matrix<R>) -> usize {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: usize, b: usize) -> usize {
        let value = matmul(self.value(a), self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn add(&mut self, a: usize, b: usize) -> usize {
        let (x, y) = (self.value(a), self.value(b));
        debug_assert_eq!((x.rows, x.cols), (y.rows, y.cols));
        let value = Matrix {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&y.data).map(|(&p, &q)| p + q).collect(),
        };
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: usize, b: usize) -> usize {
        let (x, y) = (self.value(a), self.value(b));
        debug_assert_eq!((x.rows, x.cols), (y.rows, y.cols));
        let value = Matrix {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&y.data).map(|(&p, &q)| p - q).collect(),
        };
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: usize, b: usize) -> usize {
        let (x, y) = (self.value(a), self.value(b));
        debug_assert_eq!((x.rows, x.cols), (y.rows, y.cols));
        let value = Matrix {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&y.data).map(|(&p, &q)| p * q).collect(),
        };
        self.push(Op::Mul(a, b), value)
    }

    pub fn add_row(&mut self, a: usize, row: usize) -> usize {
        let (x, r) = (self.value(a), self.value(row));
        debug_assert_eq!(r.rows, 1);
        debug_assert_eq!(x.cols, r.cols);
        let mut value = x.clone();
        for i in 0..value.rows {
            for (o, &b) in value.row_mut(i).iter_mut().zip(&r.data) {
                *o += b;
            }
        }
        self.push(Op::AddRow(a, row), value)
    }

    pub fn mul_col(&mut self, col: usize, b: usize) -> usize {
        let (c, x) = (self.value(col), self.value(b));
        debug_assert_eq!(c.cols, 1);
        debug_assert_eq!(c.rows, x.rows);
        let mut value = x.clone();
        for i in 0..value.rows {
            let s = c.data[i];
            for o in value.row_mut(i) {
                *o = *o * s;
            }
        }
        self.push(Op::MulCol(col, b), value)
    }

    pub fn gelu(&mut self, a: usize) -> usize {
        let input = self.value(a);
        let mut tanh_u = Matrix::zeros(input.rows, input.cols);
        let mut value = Matrix::zeros(input.rows, input.cols);
        for ((o, t), &x) in value.data.iter_mut().zip(tanh_u.data.iter_mut()).zip(&input.data) {
            let u = gelu_inner(x).tanh();
            *t = u;
            *o = R::of(0.5) * x * (R::one() + u);
        }
        self.push(Op::Gelu(a, tanh_u), value)
    }

    pub fn sigmoid(&mut self, a: usize) -> usize {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    /// Batch normalization over all rows (node-level statistics). In batch
    /// mode the statistics come from the input itself; in frozen mode the
    /// supplied running statistics are used and treated as constants.
    pub fn batch_norm(
        &mut self,
        x: usize,
        gamma: usize,
        beta: usize,
        eps: R,
        frozen_stats: Option<(&[R], &[R])>,
    ) -> usize {
        let input = self.value(x);
        let (rows, cols) = (input.rows, input.cols);
        let (mean, var, frozen) = match frozen_stats {
            Some((m, v)) => (m.to_vec(), v.to_vec(), true),
            None => {
                let inv_m = R::of(1.0 / rows as f64);
                let mut mean = vec![R::zero(); cols];
                for i in 0..rows {
                    for (m, &v) in mean.iter_mut().zip(input.row(i)) {
                        *m += v;
                    }
                }
                for m in mean.iter_mut() {
                    *m *= inv_m;
                }
                let mut var = vec![R::zero(); cols];
                for i in 0..rows {
                    for ((s, &v), &m) in var.iter_mut().zip(input.row(i)).zip(&mean) {
                        let d = v - m;
                        *s += d * d;
                    }
                }
                for s in var.iter_mut() {
                    *s *= inv_m;
                }
                (mean, var, false)
            }
        };
        let inv_std: Vec<R> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
        let mut xhat = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let src = input.row(i);
            let dst = xhat.row_mut(i);
            for c in 0..cols {
                dst[c] = (src[c] - mean[c]) * inv_std[c];
            }
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        debug_assert_eq!(g.cols, cols);
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let src = xhat.row(i);
            let dst = value.row_mut(i);
            for c in 0..cols {
                dst[c] = g.data[c] * src[c] + b.data[c];
            }
        }
        self.push(Op::BatchNorm { x, gamma, beta, mean, inv_std, var, xhat, frozen }, value)
    }

    /// Batch statistics `(mean, biased var)` recorded by a batch-mode BN
    /// node, for running-average updates.
    pub fn bn_batch_stats(&self, id: usize) -> Option<(&[R], &[R])> {
        match &self.nodes[id].op {
            Op::BatchNorm { mean, var, frozen: false, .. } => Some((mean, var)),
            _ => None,
        }
    }

    pub fn concat_cols(&mut self, parts: &[usize]) -> usize {
        let rows = self.value(parts[0]).rows;
        let total: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut value = Matrix::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let part = self.value(p);
            debug_assert_eq!(part.rows, rows);
            for i in 0..rows {
                let src = part.row(i);
                value.data[i * total + offset..i * total + offset + part.cols]
                    .copy_from_slice(src);
            }
            offset += part.cols;
        }
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    pub fn slice_cols(&mut self, x: usize, start: usize, width: usize) -> usize {
        let input = self.value(x);
        debug_assert!(start + width <= input.cols);
        let mut value = Matrix::zeros(input.rows, width);
        for i in 0..input.rows {
            value.row_mut(i).copy_from_slice(&input.row(i)[start..start + width]);
        }
        self.push(Op::SliceCols { x, start, width }, value)
    }

    /// Neighborhood attention: for each node `i`, softmax over
    /// `q_i . k_j / scale` for `j` in its CSR row, aggregating rows of `v`.
    pub fn attention(&mut self, q: usize, k: usize, v: usize, csr: Rc<Csr>, scale: R) -> usize {
        let (qm, km, vm) = (self.value(q), self.value(k), self.value(v));
        let rows = qm.rows;
        let inv_scale = scale.recip();
        let mut alpha = vec![R::zero(); csr.cols.len()];
        let mut value = Matrix::zeros(rows, vm.cols);
        for i in 0..rows {
            let span = csr.row_ptr[i]..csr.row_ptr[i + 1];
            if span.is_empty() {
                continue;
            }
            let mut max_logit = R::neg_infinity();
            for e in span.clone() {
                let logit = dot(qm.row(i), km.row(csr.cols[e])) * inv_scale;
                alpha[e] = logit;
                max_logit = max_logit.max(logit);
            }
            let mut total = R::zero();
            for e in span.clone() {
                let w = (alpha[e] - max_logit).exp();
                alpha[e] = w;
                total += w;
            }
            let inv_total = total.recip();
            let out_row = value.row_mut(i);
            for e in span {
                alpha[e] *= inv_total;
                axpy(alpha[e], vm.row(csr.cols[e]), out_row);
            }
        }
        self.push(Op::Attention { q, k, v, csr, alpha, inv_scale }, value)
    }

    /// Element-wise max over each row segment (one output row per graph).
    pub fn max_pool_segments(&mut self, x: usize, segments: Segments) -> usize {
        let input = self.value(x);
        let cols = input.cols;
        let mut value = Matrix::zeros(segments.len(), cols);
        let mut argmax = vec![0usize; segments.len() * cols];
        for (g, &(start, len)) in segments.iter().enumerate() {
            debug_assert!(len > 0);
            let dst = &mut value.data[g * cols..(g + 1) * cols];
            dst.copy_from_slice(input.row(start));
            for slot in argmax[g * cols..(g + 1) * cols].iter_mut() {
                *slot = start;
            }
            for row in start + 1..start + len {
                let src = input.row(row);
                for c in 0..cols {
                    // strict: ties keep the lowest row index
                    if src[c] > dst[c] {
                        dst[c] = src[c];
                        argmax[g * cols + c] = row;
                    }
                }
            }
        }
        self.push(Op::MaxPoolSegments { x, segments, argmax }, value)
    }

    pub fn mean_all(&mut self, a: usize) -> usize {
        let x = self.value(a);
        let total: R = x.data.iter().copied().sum();
        let value = Matrix::from_vec(1, 1, vec![total / R::of(x.data.len() as f64)]);
        self.push(Op::MeanAll(a), value)
    }

    /// Reverse sweep from a scalar node; returns one gradient slot per node.
    pub fn backward(&self, loss: usize) -> Vec<Option<Matrix<R>>> {
        let scalar = self.value(loss);
        assert_eq!((scalar.rows, scalar.cols), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Matrix<R>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Matrix::from_vec(1, 1, vec![R::one()]));
        for id in (0..=loss).rev() {
            let Some(grad) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(grad);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = matmul_bt(&grad, self.value(*b));
                    let db = matmul_at(self.value(*a), &grad);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let da = hadamard(&grad, self.value(*b));
                    let db = hadamard(&grad, self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(a, row) => {
                    let mut drow = Matrix::zeros(1, grad.cols);
                    for i in 0..grad.rows {
                        axpy(R::one(), grad.row(i), drow.row_mut(0));
                    }
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *row, drow);
                }
                Op::MulCol(col, b) => {
                    let c = self.value(*col);
                    let x = self.value(*b);
                    let mut dcol = Matrix::zeros(c.rows, 1);
                    let mut dx = Matrix::zeros(x.rows, x.cols);
                    for i in 0..x.rows {
                        dcol.data[i] = dot(grad.row(i), x.row(i));
                        axpy(c.data[i], grad.row(i), dx.row_mut(i));
                    }
                    accumulate(&mut grads, *col, dcol);
                    accumulate(&mut grads, *b, dx);
                }
                Op::Gelu(a, tanh_u) => {
                    let input = self.value(*a);
                    let mut dx = Matrix::zeros(input.rows, input.cols);
                    let c = R::of(0.7978845608028654);
                    let k3 = R::of(3.0 * 0.044715);
                    let half = R::of(0.5);
                    for ((o, (&g, &x)), &t) in dx
                        .data
                        .iter_mut()
                        .zip(grad.data.iter().zip(&input.data))
                        .zip(&tanh_u.data)
                    {
                        let du = c * (R::one() + k3 * x * x);
                        *o = g * (half * (R::one() + t) + half * x * (R::one() - t * t) * du);
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Sigmoid(a) => {
                    let out = &self.nodes[id].value;
                    let mut dx = Matrix::zeros(out.rows, out.cols);
                    for (o, (&g, &s)) in dx.data.iter_mut().zip(grad.data.iter().zip(&out.data)) {
                        *o = g * s * (R::one() - s);
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::BatchNorm { x, gamma, beta, inv_std, xhat, frozen, .. } => {
                    let g = self.value(*gamma);
                    let rows = xhat.rows;
                    let cols = xhat.cols;
                    let mut dgamma = Matrix::zeros(1, cols);
                    let mut dbeta = Matrix::zeros(1, cols);
                    for i in 0..rows {
                        for c in 0..cols {
                            dgamma.data[c] += grad.get(i, c) * xhat.get(i, c);
                            dbeta.data[c] += grad.get(i, c);
                        }
                    }
                    let mut dx = Matrix::zeros(rows, cols);
                    if *frozen {
                        for i in 0..rows {
                            for c in 0..cols {
                                dx.set(i, c, grad.get(i, c) * g.data[c] * inv_std[c]);
                            }
                        }
                    } else {
                        // full backward through the batch statistics
                        let inv_m = R::of(1.0 / rows as f64);
                        let mut sum_dxhat = vec![R::zero(); cols];
                        let mut sum_dxhat_xhat = vec![R::zero(); cols];
                        for i in 0..rows {
                            for c in 0..cols {
                                let dxh = grad.get(i, c) * g.data[c];
                                sum_dxhat[c] += dxh;
                                sum_dxhat_xhat[c] += dxh * xhat.get(i, c);
                            }
                        }
                        for i in 0..rows {
                            for c in 0..cols {
                                let dxh = grad.get(i, c) * g.data[c];
                                let m = R::of(rows as f64);
                                let v = inv_std[c] * inv_m
                                    * (m * dxh
                                        - sum_dxhat[c]
                                        - xhat.get(i, c) * sum_dxhat_xhat[c]);
                                dx.set(i, c, v);
                            }
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let part_cols = self.value(p).cols;
                        let mut dp = Matrix::zeros(grad.rows, part_cols);
                        for i in 0..grad.rows {
                            dp.row_mut(i).copy_from_slice(
                                &grad.row(i)[offset..offset + part_cols],
                            );
                        }
                        accumulate(&mut grads, p, dp);
                        offset += part_cols;
                    }
                }
                Op::SliceCols { x, start, width } => {
                    // accumulate straight into the window to avoid
                    // materializing a full-width zero matrix per slice
                    let (rows, cols) = {
                        let input = self.value(*x);
                        (input.rows, input.cols)
                    };
                    let slot = grads[*x].get_or_insert_with(|| Matrix::zeros(rows, cols));
                    for i in 0..grad.rows {
                        let window = &mut slot.row_mut(i)[*start..*start + *width];
                        for (o, &g) in window.iter_mut().zip(grad.row(i)) {
                            *o += g;
                        }
                    }
                }
                Op::Attention { q, k, v, csr, alpha, inv_scale } => {
                    let qm = self.value(*q);
                    let km = self.value(*k);
                    let vm = self.value(*v);
                    let mut dq = Matrix::zeros(qm.rows, qm.cols);
                    let mut dk = Matrix::zeros(km.rows, km.cols);
                    let mut dv = Matrix::zeros(vm.rows, vm.cols);
                    for i in 0..qm.rows {
                        let span = csr.row_ptr[i]..csr.row_ptr[i + 1];
                        if span.is_empty() {
                            continue;
                        }
                        let dout = grad.row(i);
                        // s_i = sum_e alpha_e (dout . v_j)
                        let mut s_i = R::zero();
                        for e in span.clone() {
                            s_i += alpha[e] * dot(dout, vm.row(csr.cols[e]));
                        }
                        for e in span {
                            let j = csr.cols[e];
                            axpy(alpha[e], dout, dv.row_mut(j));
                            let dlogit = alpha[e] * (dot(dout, vm.row(j)) - s_i);
                            let w = dlogit * *inv_scale;
                            axpy(w, km.row(j), dq.row_mut(i));
                            // dk_j += w * q_i
                            axpy(w, qm.row(i), dk.row_mut(j));
                        }
                    }
                    accumulate(&mut grads, *q, dq);
                    accumulate(&mut grads, *k, dk);
                    accumulate(&mut grads, *v, dv);
                }
                Op::MaxPoolSegments { x, segments, argmax } => {
                    let input = self.value(*x);
                    let cols = input.cols;
                    let mut dx = Matrix::zeros(input.rows, input.cols);
                    for g in 0..segments.len() {
                        for c in 0..cols {
                            let row = argmax[g * cols + c];
                            *dx.row_mut(row).get_mut(c).unwrap() += grad.get(g, c);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MeanAll(a) => {
                    let x = self.value(*a);
                    let scale = grad.data[0] / R::of(x.data.len() as f64);
                    let dx = Matrix {
                        rows: x.rows,
                        cols: x.cols,
                        data: vec![scale; x.data.len()],
                    };
                    accumulate(&mut grads, *a, dx);
                }
            }
        }
        grads
    }
}

fn accumulate<R: Real>(grads: &mut [Option<Matrix<R>>], id: usize, delta: Matrix<R>) {
    match &mut grads[id] {
        Some(existing) => {
            for (o, &d) in existing.data.iter_mut().zip(&delta.data) {
                *o += d;
            }
        }
        slot => *slot = Some(delta),
    }
}

fn hadamard<R: Real>(a: &Matrix<R>, b: &Matrix<R>) -> Matrix<R> {
    Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| x * y).collect(),
    }
}

/// Tanh-form GELU; smooth, with the analytic derivative used in backward.
pub fn gelu<R: Real>(x: R) -> R {
    R::of(0.5) * x * (R::one() + gelu_inner(x).tanh())
}

fn gelu_inner<R: Real>(x: R) -> R {
    let c = R::of(0.7978845608028654); // sqrt(2/pi)
    let k = R::of(0.044715);
    c * (x + k * x * x * x)
}

pub fn gelu_deriv<R: Real>(x: R) -> R {
    let c = R::of(0.7978845608028654);
    let k = R::of(0.044715);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let du = c * (R::one() + R::of(3.0) * k * x * x);
    R::of(0.5) * (R::one() + t) + R::of(0.5) * x * (R::one() - t * t) * du
}

pub fn sigmoid<R: Real>(x: R) -> R {
    (R::one() + (-x).exp()).recip()
}
