//! The graph-transformer QFI predictor.
//!
//! Architecture, per forward pass on a batch of graphs (all nodes of the
//! batch concatenated into one matrix so batch-norm statistics are
//! node-level across the minibatch):
//!
//! - embedding: `h0 = GELU(BN(x W0 + b0))`
//! - `layers` rounds of a C-head graph transformer followed by an MLP:
//!   per head, `p = h W1`, attention `m_i = sum_j alpha_ij (h W2)_j` over
//!   the node's successors plus itself with
//!   `alpha = softmax((h W3)_i . (h W4)_j / sqrt(s))`, gate
//!   `beta = sigmoid([p, m, p - m] w5)`, head output
//!   `beta p + (1 - beta) m`; heads concatenate back to width `s`, then
//!   `h = (GELU(BN(hhat W6 + b6))) W7 + b7`
//! - readout: element-wise max over each graph's nodes
//! - predictor: `w . z + b`, trained against labels scaled by `1/N^2`
//!
//! The attention logits are scaled by `sqrt(s)` (the full latent width,
//! not the per-head width). Self-loops are always added so sink nodes
//! receive messages.

use std::io::{Read, Write};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SetupGraph;
use crate::scalar::Real;
use crate::surrogate::tape::{Csr, Segments, Tape};
use crate::surrogate::tensor::Matrix;

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Latent width `s`.
    pub latent: usize,
    /// Graph-transformer layers.
    pub layers: usize,
    /// Attention heads `C`; must divide `latent`.
    pub heads: usize,
    /// Node feature width `d = d1 + d2`.
    pub feature_dim: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Labels are divided by this before fitting (use `N^2`).
    pub label_scale: f64,
}

impl ModelConfig {
    /// Reference-scale model: latent 256, 5 layers, 4 heads.
    pub fn reference(feature_dim: usize, label_scale: f64) -> Self {
        ModelConfig {
            latent: 256,
            layers: 5,
            heads: 4,
            feature_dim,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            label_scale,
        }
    }

    /// Desk-scale model for quick runs: latent 64, same depth.
    pub fn desk(feature_dim: usize, label_scale: f64) -> Self {
        ModelConfig { latent: 64, ..Self::reference(feature_dim, label_scale) }
    }

    pub fn head_dim(&self) -> usize {
        self.latent / self.heads
    }

    fn validate(&self) -> Result<()> {
        if self.latent == 0 || self.heads == 0 || self.latent % self.heads != 0 {
            return Err(Error::Shape(format!(
                "heads {} must divide latent {}",
                self.heads, self.latent
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Param<R: Real> {
    pub name: String,
    pub value: Matrix<R>,
}

/// Running batch-norm statistics for one normalization site.
#[derive(Clone, Debug)]
pub struct BnBuffers<R: Real> {
    pub name: String,
    pub running_mean: Vec<R>,
    pub running_var: Vec<R>,
}

/// Forward/eval mode: batch statistics vs frozen running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub struct SurrogateModel<R: Real> {
    pub config: ModelConfig,
    params: Vec<Param<R>>,
    bn: Vec<BnBuffers<R>>,
}

/// Where a parameter's gradient lives after backward: its own leaf, or a
/// column window of a fused projection leaf.
pub enum GradSlot {
    Leaf(usize),
    Cols { leaf: usize, start: usize, width: usize },
}

/// Handles into the tape after building a forward pass.
pub struct BatchForward {
    /// `G x 1` predictions in label-scaled units.
    pub pred: usize,
    /// `G x s` post-readout latents.
    pub latent: usize,
    /// Gradient source per parameter, aligned with the parameter order.
    pub grad_slots: Vec<GradSlot>,
    /// Batch-mode BN node per site, aligned with the model's BN buffers.
    pub bn_nodes: Vec<usize>,
}

const MAGIC: &[u8; 4] = b"DQS1";

impl<R: Real> SurrogateModel<R> {
    /// Fan-in-scaled uniform initialization, fully determined by the seed.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = config.latent;
        let d = config.feature_dim;
        let h = config.head_dim();
        let mut params = Vec::new();
        let mut bn = Vec::new();
        let weight = |name: String, rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (rows as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| R::of(rng.random_range(-bound..bound)))
                .collect();
            Param { name, value: Matrix::from_vec(rows, cols, data) }
        };
        let affine = |name: &str, cols: usize, one: bool| Param {
            name: name.to_string(),
            value: Matrix::from_vec(1, cols, vec![if one { R::one() } else { R::zero() }; cols]),
        };
        params.push(weight("embed.w".into(), d, s, &mut rng));
        params.push(weight("embed.b".into(), 1, s, &mut rng));
        params.push(affine("embed.bn.gamma", s, true));
        params.push(affine("embed.bn.beta", s, false));
        bn.push(BnBuffers {
            name: "embed.bn".into(),
            running_mean: vec![R::zero(); s],
            running_var: vec![R::one(); s],
        });
        for layer in 0..config.layers {
            for head in 0..config.heads {
                for (tag, rows, cols) in [
                    ("w1", s, h),
                    ("w2", s, h),
                    ("w3", s, h),
                    ("w4", s, h),
                    ("w5", 3 * h, 1),
                ] {
                    params.push(weight(format!("layer{layer}.head{head}.{tag}"), rows, cols, &mut rng));
                }
            }
            params.push(weight(format!("layer{layer}.w6"), s, s, &mut rng));
            params.push(weight(format!("layer{layer}.b6"), 1, s, &mut rng));
            params.push(affine(&format!("layer{layer}.bn.gamma"), s, true));
            params.push(affine(&format!("layer{layer}.bn.beta"), s, false));
            params.push(weight(format!("layer{layer}.w7"), s, s, &mut rng));
            params.push(weight(format!("layer{layer}.b7"), 1, s, &mut rng));
            bn.push(BnBuffers {
                name: format!("layer{layer}.bn"),
                running_mean: vec![R::zero(); s],
                running_var: vec![R::one(); s],
            });
        }
        params.push(weight("readout.w".into(), s, 1, &mut rng));
        params.push(weight("readout.b".into(), 1, 1, &mut rng));
        Ok(SurrogateModel { config, params, bn })
    }

    pub fn params(&self) -> &[Param<R>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<R>] {
        &mut self.params
    }

    pub fn bn_buffers(&self) -> &[BnBuffers<R>] {
        &self.bn
    }

    pub fn param_by_name(&self, name: &str) -> Option<&Matrix<R>> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn param_by_name_mut(&mut self, name: &str) -> Option<&mut Matrix<R>> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    fn embed_block(&self) -> (usize, usize, usize, usize) {
        (0, 1, 2, 3)
    }

    fn layer_block(&self, layer: usize) -> usize {
        4 + layer * (5 * self.config.heads + 6)
    }

    fn readout_block(&self) -> usize {
        4 + self.config.layers * (5 * self.config.heads + 6)
    }

    /// Concatenate a batch of graphs into tape inputs: the stacked feature
    /// matrix, successor+self CSR over global node ids, and per-graph
    /// segments.
    pub fn build_batch(&self, graphs: &[&SetupGraph]) -> Result<(Matrix<R>, Rc<Csr>, Segments)> {
        let d = self.config.feature_dim;
        let total: usize = graphs.iter().map(|g| g.n_nodes).sum();
        let mut features = Matrix::zeros(total, d);
        let mut row_ptr = Vec::with_capacity(total + 1);
        let mut cols = Vec::new();
        let mut segments = Vec::with_capacity(graphs.len());
        row_ptr.push(0);
        let mut offset = 0;
        for graph in graphs {
            if graph.feature_dim() != d {
                return Err(Error::Shape(format!(
                    "graph feature dim {} does not match model {}",
                    graph.feature_dim(),
                    d
                )));
            }
            for node in 0..graph.n_nodes {
                let row = features.row_mut(offset + node);
                for c in 0..d {
                    row[c] = R::of(graph.feature(node, c) as f64);
                }
                cols.push(offset + node); // self-loop
                for j in 0..graph.n_nodes {
                    if j != node && graph.edge(node, j) {
                        cols.push(offset + j);
                    }
                }
                row_ptr.push(cols.len());
            }
            segments.push((offset, graph.n_nodes));
            offset += graph.n_nodes;
        }
        Ok((features, Rc::new(Csr { row_ptr, cols }), Rc::new(segments)))
    }

    /// Record the full forward computation for a batch on `tape`.
    ///
    /// The four per-head projections of every layer are evaluated as one
    /// fused `s x 4s` matmul and sliced back apart; gradients are routed
    /// to the individual parameters through [`GradSlot::Cols`].
    pub fn forward_tape(
        &self,
        tape: &mut Tape<R>,
        graphs: &[&SetupGraph],
        mode: Mode,
    ) -> Result<BatchForward> {
        let (features, csr, segments) = self.build_batch(graphs)?;
        let s = self.config.latent;
        let hd = self.config.head_dim();
        let mut grad_slots: Vec<GradSlot> = Vec::with_capacity(self.params.len());
        for param in &self.params {
            // per-head projection weights are folded into fused leaves below
            if param.name.contains(".head") && !param.name.ends_with("w5") {
                grad_slots.push(GradSlot::Cols { leaf: usize::MAX, start: 0, width: 0 });
            } else {
                grad_slots.push(GradSlot::Leaf(tape.leaf(param.value.clone())));
            }
        }
        let leaf_of = |slots: &[GradSlot], idx: usize| -> usize {
            match slots[idx] {
                GradSlot::Leaf(id) => id,
                GradSlot::Cols { .. } => unreachable!("fused parameter"),
            }
        };
        let x = tape.leaf(features);
        let eps = R::of(self.config.bn_eps);
        let scale = R::of((s as f64).sqrt());
        let mut bn_nodes = Vec::with_capacity(self.bn.len());

        let bn_stats = |site: usize| -> Option<(&[R], &[R])> {
            match mode {
                Mode::Train => None,
                Mode::Eval => {
                    Some((&self.bn[site].running_mean[..], &self.bn[site].running_var[..]))
                }
            }
        };

        // embedding
        let (ew, eb, eg, ebeta) = self.embed_block();
        let lin = tape.matmul(x, leaf_of(&grad_slots, ew));
        let lin = tape.add_row(lin, leaf_of(&grad_slots, eb));
        let bn0 = tape.batch_norm(
            lin,
            leaf_of(&grad_slots, eg),
            leaf_of(&grad_slots, ebeta),
            eps,
            bn_stats(0),
        );
        bn_nodes.push(bn0);
        let mut h = tape.gelu(bn0);

        for layer in 0..self.config.layers {
            let base = self.layer_block(layer);
            // fused [w1|w2|w3|w4] per head, all heads side by side
            let mut fused = Matrix::zeros(s, 4 * s);
            for head in 0..self.config.heads {
                for role in 0..4 {
                    let param = &self.params[base + head * 5 + role].value;
                    let offset = (head * 4 + role) * hd;
                    for row in 0..s {
                        fused.row_mut(row)[offset..offset + hd].copy_from_slice(param.row(row));
                    }
                }
            }
            let fused_leaf = tape.leaf(fused);
            let proj = tape.matmul(h, fused_leaf);
            let mut head_outputs = Vec::with_capacity(self.config.heads);
            for head in 0..self.config.heads {
                let hb = base + head * 5;
                let offset = head * 4 * hd;
                for role in 0..4 {
                    grad_slots[hb + role] = GradSlot::Cols {
                        leaf: fused_leaf,
                        start: offset + role * hd,
                        width: hd,
                    };
                }
                let p = tape.slice_cols(proj, offset, hd);
                let u = tape.slice_cols(proj, offset + hd, hd);
                let q = tape.slice_cols(proj, offset + 2 * hd, hd);
                let k = tape.slice_cols(proj, offset + 3 * hd, hd);
                let m = tape.attention(q, k, u, csr.clone(), scale);
                let p_minus_m = tape.sub(p, m);
                let gate_in = tape.concat_cols(&[p, m, p_minus_m]);
                let gate_logit = tape.matmul(gate_in, leaf_of(&grad_slots, hb + 4));
                let beta = tape.sigmoid(gate_logit);
                let gated = tape.mul_col(beta, p_minus_m);
                head_outputs.push(tape.add(m, gated));
            }
            let hhat = tape.concat_cols(&head_outputs);
            let tail = base + 5 * self.config.heads;
            let lin = tape.matmul(hhat, leaf_of(&grad_slots, tail));
            let lin = tape.add_row(lin, leaf_of(&grad_slots, tail + 1));
            let bn = tape.batch_norm(
                lin,
                leaf_of(&grad_slots, tail + 2),
                leaf_of(&grad_slots, tail + 3),
                eps,
                bn_stats(layer + 1),
            );
            bn_nodes.push(bn);
            let act = tape.gelu(bn);
            let out = tape.matmul(act, leaf_of(&grad_slots, tail + 4));
            h = tape.add_row(out, leaf_of(&grad_slots, tail + 5));
        }

        let latent = tape.max_pool_segments(h, segments);
        let ro = self.readout_block();
        let lin = tape.matmul(latent, leaf_of(&grad_slots, ro));
        let pred = tape.add_row(lin, leaf_of(&grad_slots, ro + 1));
        Ok(BatchForward { pred, latent, grad_slots, bn_nodes })
    }

    /// Prediction (label-scaled units) and readout latent for one graph.
    pub fn forward(&self, graph: &SetupGraph, mode: Mode) -> Result<(R, Vec<R>)> {
        let mut tape = Tape::new();
        let fwd = self.forward_tape(&mut tape, &[graph], mode)?;
        let pred = tape.value(fwd.pred).data[0];
        let latent = tape.value(fwd.latent).row(0).to_vec();
        Ok((pred, latent))
    }

    /// Eval-mode QFI prediction in physical units.
    pub fn predict_qfi(&self, graph: &SetupGraph) -> Result<R> {
        let (scaled, _) = self.forward(graph, Mode::Eval)?;
        Ok(scaled * R::of(self.config.label_scale))
    }

    /// Eval-mode predictions for many graphs, batched for speed.
    /// Deterministic regardless of chunking.
    pub fn predict_qfi_batch(&self, graphs: &[&SetupGraph]) -> Result<Vec<R>> {
        let scale = R::of(self.config.label_scale);
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(256) {
            let mut tape = Tape::new();
            let fwd = self.forward_tape(&mut tape, chunk, Mode::Eval)?;
            out.extend(tape.value(fwd.pred).data.iter().map(|&p| p * scale));
        }
        Ok(out)
    }

    /// Mean-squared error and per-parameter gradients on a batch of
    /// (graph, scaled label) pairs.
    pub fn loss_and_grads(
        &self,
        batch: &[(&SetupGraph, R)],
    ) -> Result<(R, Vec<Matrix<R>>)> {
        self.loss_and_grads_mode(batch, Mode::Train).map(|(l, g, _)| (l, g))
    }

    /// As [`Self::loss_and_grads`], also returning the batch BN statistics
    /// gathered during the forward pass (empty in eval mode).
    #[allow(clippy::type_complexity)]
    pub fn loss_and_grads_mode(
        &self,
        batch: &[(&SetupGraph, R)],
        mode: Mode,
    ) -> Result<(R, Vec<Matrix<R>>, Vec<(Vec<R>, Vec<R>)>)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let graphs: Vec<&SetupGraph> = batch.iter().map(|(g, _)| *g).collect();
        let labels: Vec<R> = batch.iter().map(|(_, y)| *y).collect();
        let mut tape = Tape::new();
        let fwd = self.forward_tape(&mut tape, &graphs, mode)?;
        let y = tape.leaf(Matrix::from_vec(labels.len(), 1, labels));
        let diff = tape.sub(fwd.pred, y);
        let sq = tape.mul(diff, diff);
        let loss = tape.mean_all(sq);
        let mse = tape.value(loss).data[0];
        let grads = tape.backward(loss);
        let mut out = Vec::with_capacity(fwd.grad_slots.len());
        for (slot, param) in fwd.grad_slots.iter().zip(&self.params) {
            let shape = (param.value.rows, param.value.cols);
            out.push(match slot {
                GradSlot::Leaf(leaf) => match &grads[*leaf] {
                    Some(g) => g.clone(),
                    None => Matrix::zeros(shape.0, shape.1),
                },
                GradSlot::Cols { leaf, start, width } => match &grads[*leaf] {
                    Some(g) => {
                        let mut slice = Matrix::zeros(g.rows, *width);
                        for i in 0..g.rows {
                            slice
                                .row_mut(i)
                                .copy_from_slice(&g.row(i)[*start..*start + *width]);
                        }
                        slice
                    }
                    None => Matrix::zeros(shape.0, shape.1),
                },
            });
        }
        let bn_stats = fwd
            .bn_nodes
            .iter()
            .filter_map(|&node| tape.bn_batch_stats(node).map(|(m, v)| (m.to_vec(), v.to_vec())))
            .collect();
        Ok((mse, out, bn_stats))
    }

    /// Fold batch statistics into the running BN buffers:
    /// `running = (1 - momentum) running + momentum * batch`.
    pub fn update_bn(&mut self, stats: &[(Vec<R>, Vec<R>)]) {
        let momentum = R::of(self.config.bn_momentum);
        let keep = R::one() - momentum;
        for (site, (mean, var)) in self.bn.iter_mut().zip(stats) {
            for (r, &b) in site.running_mean.iter_mut().zip(mean) {
                *r = keep * *r + momentum * b;
            }
            for (r, &b) in site.running_var.iter_mut().zip(var) {
                *r = keep * *r + momentum * b;
            }
        }
    }

    /// Serialize: magic, version, config block, then every named parameter
    /// array and BN buffer as little-endian f64 with shape metadata.
    pub fn save(&self, mut out: impl Write) -> Result<()> {
        out.write_all(MAGIC)?;
        write_u32(&mut out, 1)?;
        write_u32(&mut out, self.config.latent as u32)?;
        write_u32(&mut out, self.config.layers as u32)?;
        write_u32(&mut out, self.config.heads as u32)?;
        write_u32(&mut out, self.config.feature_dim as u32)?;
        write_f64(&mut out, self.config.bn_momentum)?;
        write_f64(&mut out, self.config.bn_eps)?;
        write_f64(&mut out, self.config.label_scale)?;
        write_u32(&mut out, self.params.len() as u32)?;
        for param in &self.params {
            write_name(&mut out, &param.name)?;
            write_u32(&mut out, param.value.rows as u32)?;
            write_u32(&mut out, param.value.cols as u32)?;
            for &v in &param.value.data {
                write_f64(&mut out, v.to_f64_lossy())?;
            }
        }
        write_u32(&mut out, self.bn.len() as u32)?;
        for site in &self.bn {
            write_name(&mut out, &site.name)?;
            write_u32(&mut out, site.running_mean.len() as u32)?;
            for &v in &site.running_mean {
                write_f64(&mut out, v.to_f64_lossy())?;
            }
            for &v in &site.running_var {
                write_f64(&mut out, v.to_f64_lossy())?;
            }
        }
        Ok(())
    }

    pub fn load(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic header".into()));
        }
        let version = read_u32(&mut input)?;
        if version != 1 {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let latent = read_u32(&mut input)? as usize;
        let layers = read_u32(&mut input)? as usize;
        let heads = read_u32(&mut input)? as usize;
        let feature_dim = read_u32(&mut input)? as usize;
        let bn_momentum = read_f64(&mut input)?;
        let bn_eps = read_f64(&mut input)?;
        let label_scale = read_f64(&mut input)?;
        let config =
            ModelConfig { latent, layers, heads, feature_dim, bn_momentum, bn_eps, label_scale };
        config.validate()?;
        let n_params = read_u32(&mut input)? as usize;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name = read_name(&mut input)?;
            let rows = read_u32(&mut input)? as usize;
            let cols = read_u32(&mut input)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(R::of(read_f64(&mut input)?));
            }
            params.push(Param { name, value: Matrix::from_vec(rows, cols, data) });
        }
        let n_bn = read_u32(&mut input)? as usize;
        let mut bn = Vec::with_capacity(n_bn);
        for _ in 0..n_bn {
            let name = read_name(&mut input)?;
            let len = read_u32(&mut input)? as usize;
            let mut running_mean = Vec::with_capacity(len);
            for _ in 0..len {
                running_mean.push(R::of(read_f64(&mut input)?));
            }
            let mut running_var = Vec::with_capacity(len);
            for _ in 0..len {
                running_var.push(R::of(read_f64(&mut input)?));
            }
            bn.push(BnBuffers { name, running_mean, running_var });
        }
        Ok(SurrogateModel { config, params, bn })
    }

    pub fn save_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }
}

fn write_u32(out: &mut impl Write, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(out: &mut impl Write, v: f64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_name(out: &mut impl Write, name: &str) -> Result<()> {
    write_u32(out, name.len() as u32)?;
    out.write_all(name.as_bytes())?;
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_name(input: &mut impl Read) -> Result<String> {
    let len = read_u32(input)? as usize;
    if len > 4096 {
        return Err(Error::ModelFormat("name too long".into()));
    }
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::ModelFormat("name not utf-8".into()))
}
