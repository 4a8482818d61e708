//! Reverse-mode autodiff over 2-D f64 arrays.
//!
//! A `Tape` records the forward graph; `backward` walks it once in reverse
//! and accumulates gradients. Rows are batch samples, columns features;
//! scalars are 1x1 arrays. Shape mismatches are programming errors and
//! panic. Softmax-style ops subtract the row/column max before
//! exponentiating, so large similarity values stay finite.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type NodeId = usize;

enum Op {
    Leaf,
    /// C = A . B
    MatMul(NodeId, NodeId),
    /// C = A . B^T (both operands have the same column count)
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// x + bias with bias broadcast over rows (bias is 1 x n)
    AddBias(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Array2<f64>,
        inv_std: Array2<f64>,
    },
    /// Row-wise L2 normalization; `norms` holds the clamped row norms.
    RowL2Norm { x: NodeId, norms: Array2<f64> },
    ConcatCols(Vec<NodeId>),
    /// Elementwise multiplication by a fixed inverted-dropout mask.
    Dropout { x: NodeId, mask: Array2<f64> },
    /// Symmetric InfoNCE over a square similarity matrix; scalar output.
    SymInfoNce { sim: NodeId },
    /// Batch-mean categorical cross-entropy from raw logits; scalar output.
    CrossEntropyMean { logits: NodeId, labels: Vec<usize> },
    /// Sum of scaled same-shape terms.
    AddScaled(Vec<(NodeId, f64)>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
}

const NORM_EPS: f64 = 1e-12;
const LN_EPS: f64 = 1e-5;

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id].value;
        assert_eq!(v.dim(), (1, 1), "node {id} is not a scalar");
        v[(0, 0)]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].needs_grad
    }

    pub fn leaf(&mut self, value: Array2<f64>, needs_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, needs_grad)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.dot(&self.nodes[b].value);
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMul(a, b), needs)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.dot(&self.nodes[b].value.t());
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMulNT(a, b), needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.dim(), self.nodes[b].value.dim());
        let value = &self.nodes[a].value + &self.nodes[b].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Add(a, b), needs)
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        assert_eq!(self.nodes[bias].value.nrows(), 1);
        assert_eq!(self.nodes[x].value.ncols(), self.nodes[bias].value.ncols());
        let value = &self.nodes[x].value + &self.nodes[bias].value;
        let needs = self.needs(x) || self.needs(bias);
        self.push(value, Op::AddBias(x, bias), needs)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.dim(), self.nodes[b].value.dim());
        let value = &self.nodes[a].value * &self.nodes[b].value;
        let needs = self.needs(a) || self.needs(b);
        self.push(value, Op::Mul(a, b), needs)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.nodes[x].value.mapv(|v| v * c);
        let needs = self.needs(x);
        self.push(value, Op::Scale(x, c), needs)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x].value.mapv(|v| 1.0 / (1.0 + (-v).exp()));
        let needs = self.needs(x);
        self.push(value, Op::Sigmoid(x), needs)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x].value.mapv(f64::tanh);
        let needs = self.needs(x);
        self.push(value, Op::Tanh(x), needs)
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let input = &self.nodes[x].value;
        let (rows, cols) = input.dim();
        assert_eq!(self.nodes[gamma].value.dim(), (1, cols));
        assert_eq!(self.nodes[beta].value.dim(), (1, cols));
        let mut xhat = Array2::zeros((rows, cols));
        let mut inv_std = Array2::zeros((rows, 1));
        for r in 0..rows {
            let row = input.row(r);
            let mean = row.sum() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let istd = 1.0 / (var + LN_EPS).sqrt();
            inv_std[(r, 0)] = istd;
            for c in 0..cols {
                xhat[(r, c)] = (input[(r, c)] - mean) * istd;
            }
        }
        let value = &xhat * &self.nodes[gamma].value + &self.nodes[beta].value;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push(
            value,
            Op::LayerNorm { x, gamma, beta, xhat, inv_std },
            needs,
        )
    }

    pub fn row_l2_normalize(&mut self, x: NodeId) -> NodeId {
        let input = &self.nodes[x].value;
        let (rows, cols) = input.dim();
        let mut norms = Array2::zeros((rows, 1));
        let mut value = Array2::zeros((rows, cols));
        for r in 0..rows {
            let norm = input.row(r).iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_EPS);
            norms[(r, 0)] = norm;
            for c in 0..cols {
                value[(r, c)] = input[(r, c)] / norm;
            }
        }
        let needs = self.needs(x);
        self.push(value, Op::RowL2Norm { x, norms }, needs)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0]].value.nrows();
        let total: usize = parts.iter().map(|&p| self.nodes[p].value.ncols()).sum();
        let mut value = Array2::zeros((rows, total));
        let mut offset = 0;
        for &p in parts {
            let part = &self.nodes[p].value;
            assert_eq!(part.nrows(), rows);
            value
                .slice_mut(ndarray::s![.., offset..offset + part.ncols()])
                .assign(part);
            offset += part.ncols();
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), needs)
    }

    /// Inverted dropout: keeps each entry with probability 1-p and scales
    /// survivors by 1/(1-p). `p` must be in [0, 1).
    pub fn dropout(&mut self, x: NodeId, p: f64, rng: &mut ChaCha8Rng) -> NodeId {
        assert!((0.0..1.0).contains(&p), "dropout probability out of range");
        if p == 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let dim = self.nodes[x].value.dim();
        let mask = Array2::from_shape_fn(dim, |_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let value = &self.nodes[x].value * &mask;
        let needs = self.needs(x);
        self.push(value, Op::Dropout { x, mask }, needs)
    }

    /// Symmetric InfoNCE over a square scaled-similarity matrix: row-wise
    /// plus column-wise cross-entropy of the diagonal, each averaged over
    /// the batch.
    pub fn sym_info_nce(&mut self, sim: NodeId) -> NodeId {
        let s = &self.nodes[sim].value;
        let (rows, cols) = s.dim();
        assert_eq!(rows, cols, "similarity matrix must be square");
        let b = rows as f64;
        let mut total = 0.0;
        for k in 0..rows {
            total += log_sum_exp(s.row(k).iter().copied()) - s[(k, k)];
            total += log_sum_exp(s.column(k).iter().copied()) - s[(k, k)];
        }
        let value = Array2::from_elem((1, 1), total / b);
        let needs = self.needs(sim);
        self.push(value, Op::SymInfoNce { sim }, needs)
    }

    /// Batch-mean cross-entropy between softmax(logits) and integer labels.
    pub fn cross_entropy_mean(&mut self, logits: NodeId, labels: &[usize]) -> NodeId {
        let l = &self.nodes[logits].value;
        let (rows, cols) = l.dim();
        assert_eq!(rows, labels.len(), "one label per row");
        assert!(labels.iter().all(|&y| y < cols), "label out of range");
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            total += log_sum_exp(l.row(r).iter().copied()) - l[(r, y)];
        }
        let value = Array2::from_elem((1, 1), total / rows as f64);
        let needs = self.needs(logits);
        self.push(
            value,
            Op::CrossEntropyMean { logits, labels: labels.to_vec() },
            needs,
        )
    }

    /// Weighted sum of same-shape nodes (used to combine scalar losses).
    pub fn add_scaled(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        assert!(!terms.is_empty());
        let dim = self.nodes[terms[0].0].value.dim();
        let mut value = Array2::zeros(dim);
        for &(id, c) in terms {
            assert_eq!(self.nodes[id].value.dim(), dim);
            value = value + self.nodes[id].value.mapv(|v| v * c);
        }
        let needs = terms.iter().any(|&(id, _)| self.needs(id));
        self.push(value, Op::AddScaled(terms.to_vec()), needs)
    }

    /// Backpropagates from a scalar root; returns one gradient slot per
    /// node (None where no gradient flows).
    pub fn backward(&mut self, root: NodeId) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        let root_dim = self.nodes[root].value.dim();
        assert_eq!(root_dim, (1, 1), "backward root must be a scalar");
        grads[root] = Some(Array2::ones(root_dim));

        for i in (0..=root).rev() {
            if grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            let g = grads[i].clone().expect("checked above");
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let delta = g.dot(&self.nodes[b].value.t());
                        accumulate(&mut grads, a, delta);
                    }
                    if self.needs(b) {
                        let delta = self.nodes[a].value.t().dot(&g);
                        accumulate(&mut grads, b, delta);
                    }
                }
                Op::MatMulNT(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let delta = g.dot(&self.nodes[b].value);
                        accumulate(&mut grads, a, delta);
                    }
                    if self.needs(b) {
                        let delta = g.t().dot(&self.nodes[a].value);
                        accumulate(&mut grads, b, delta);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        accumulate(&mut grads, a, g.clone());
                    }
                    if self.needs(b) {
                        accumulate(&mut grads, b, g.clone());
                    }
                }
                Op::AddBias(x, bias) => {
                    let (x, bias) = (*x, *bias);
                    if self.needs(x) {
                        accumulate(&mut grads, x, g.clone());
                    }
                    if self.needs(bias) {
                        let summed = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads, bias, summed);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let delta = &g * &self.nodes[b].value;
                        accumulate(&mut grads, a, delta);
                    }
                    if self.needs(b) {
                        let delta = &g * &self.nodes[a].value;
                        accumulate(&mut grads, b, delta);
                    }
                }
                Op::Scale(x, c) => {
                    let (x, c) = (*x, *c);
                    if self.needs(x) {
                        accumulate(&mut grads, x, g.mapv(|v| v * c));
                    }
                }
                Op::Sigmoid(x) => {
                    let x = *x;
                    if self.needs(x) {
                        let y = &self.nodes[i].value;
                        let delta = &g * &(y * &y.mapv(|v| 1.0 - v));
                        accumulate(&mut grads, x, delta);
                    }
                }
                Op::Tanh(x) => {
                    let x = *x;
                    if self.needs(x) {
                        let y = &self.nodes[i].value;
                        let delta = &g * &y.mapv(|v| 1.0 - v * v);
                        accumulate(&mut grads, x, delta);
                    }
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let (x, gamma, beta) = (*x, *gamma, *beta);
                    let cols = xhat.ncols() as f64;
                    if self.needs(gamma) {
                        let delta = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads, gamma, delta);
                    }
                    if self.needs(beta) {
                        let delta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads, beta, delta);
                    }
                    if self.needs(x) {
                        let gamma_row = &self.nodes[gamma].value;
                        let dxhat = &g * gamma_row;
                        let mean_dxhat = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1)) / cols;
                        let mean_dxhat_xhat =
                            (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1)) / cols;
                        let delta = (&dxhat - &mean_dxhat - &(xhat * &mean_dxhat_xhat)) * inv_std;
                        accumulate(&mut grads, x, delta);
                    }
                }
                Op::RowL2Norm { x, norms } => {
                    let x = *x;
                    if self.needs(x) {
                        let y = &self.nodes[i].value;
                        let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                        let delta = (&g - &(y * &dot)) / norms;
                        accumulate(&mut grads, x, delta);
                    }
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let mut offset = 0;
                    for p in parts {
                        let width = self.nodes[p].value.ncols();
                        if self.needs(p) {
                            let delta = g.slice(ndarray::s![.., offset..offset + width]).to_owned();
                            accumulate(&mut grads, p, delta);
                        }
                        offset += width;
                    }
                }
                Op::Dropout { x, mask } => {
                    let x = *x;
                    if self.needs(x) {
                        let delta = &g * mask;
                        accumulate(&mut grads, x, delta);
                    }
                }
                Op::SymInfoNce { sim } => {
                    let sim = *sim;
                    if self.needs(sim) {
                        let s = &self.nodes[sim].value;
                        let n = s.nrows();
                        let upstream = g[(0, 0)] / n as f64;
                        let mut delta: Array2<f64> = Array2::zeros((n, n));
                        for k in 0..n {
                            let row_lse = log_sum_exp(s.row(k).iter().copied());
                            for j in 0..n {
                                delta[(k, j)] += (s[(k, j)] - row_lse).exp();
                            }
                            let col_lse = log_sum_exp(s.column(k).iter().copied());
                            for j in 0..n {
                                delta[(j, k)] += (s[(j, k)] - col_lse).exp();
                            }
                            delta[(k, k)] -= 2.0;
                        }
                        accumulate(&mut grads, sim, delta.mapv(|v| v * upstream));
                    }
                }
                Op::CrossEntropyMean { logits, labels } => {
                    let logits = *logits;
                    let labels = labels.clone();
                    if self.needs(logits) {
                        let l = &self.nodes[logits].value;
                        let (rows, cols) = l.dim();
                        let upstream = g[(0, 0)] / rows as f64;
                        let mut delta: Array2<f64> = Array2::zeros((rows, cols));
                        for (r, &y) in labels.iter().enumerate() {
                            let lse = log_sum_exp(l.row(r).iter().copied());
                            for c in 0..cols {
                                delta[(r, c)] = (l[(r, c)] - lse).exp();
                            }
                            delta[(r, y)] -= 1.0;
                        }
                        accumulate(&mut grads, logits, delta.mapv(|v| v * upstream));
                    }
                }
                Op::AddScaled(terms) => {
                    let terms = terms.clone();
                    for (id, c) in terms {
                        if self.needs(id) {
                            accumulate(&mut grads, id, g.mapv(|v| v * c));
                        }
                    }
                }
            }
        }
        grads
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, delta: Array2<f64>) {
    match &mut grads[id] {
        Some(existing) => *existing += &delta,
        slot @ None => *slot = Some(delta),
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;
    use ndarray::arr2;

    /// Central finite differences over every entry of every grad leaf.
    fn finite_difference_check<F>(leaves: &mut [Array2<f64>], build: F, tol: f64)
    where
        F: Fn(&mut Tape, &[NodeId]) -> NodeId,
    {
        let eval = |leaves: &[Array2<f64>]| -> f64 {
            let mut tape = Tape::new();
            let ids: Vec<NodeId> = leaves.iter().map(|l| tape.leaf(l.clone(), true)).collect();
            let root = build(&mut tape, &ids);
            tape.scalar(root)
        };

        let mut tape = Tape::new();
        let ids: Vec<NodeId> = leaves.iter().map(|l| tape.leaf(l.clone(), true)).collect();
        let root = build(&mut tape, &ids);
        let grads = tape.backward(root);

        let h = 1e-5;
        for (li, id) in ids.iter().enumerate() {
            let analytic = grads[*id].clone().unwrap_or_else(|| {
                Array2::zeros(leaves[li].dim())
            });
            let dim = leaves[li].dim();
            for r in 0..dim.0 {
                for c in 0..dim.1 {
                    let orig = leaves[li][(r, c)];
                    leaves[li][(r, c)] = orig + h;
                    let plus = eval(leaves);
                    leaves[li][(r, c)] = orig - h;
                    let minus = eval(leaves);
                    leaves[li][(r, c)] = orig;
                    let numeric = (plus - minus) / (2.0 * h);
                    let a = analytic[(r, c)];
                    let denom = a.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        ((a - numeric) / denom).abs() < tol,
                        "leaf {li} entry ({r},{c}): analytic {a} vs numeric {numeric}"
                    );
                }
            }
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gradients_through_dense_stack() {
        let mut rng = rng_from(1);
        let mut leaves = vec![
            random_matrix(&mut rng, 3, 4),  // input
            random_matrix(&mut rng, 4, 5),  // weight
            random_matrix(&mut rng, 1, 5),  // bias
            random_matrix(&mut rng, 1, 5),  // gamma
            random_matrix(&mut rng, 1, 5),  // beta
        ];
        finite_difference_check(
            &mut leaves,
            |tape, ids| {
                let h = tape.matmul(ids[0], ids[1]);
                let h = tape.add_bias(h, ids[2]);
                let h = tape.tanh(h);
                let h = tape.layer_norm(h, ids[3], ids[4]);
                let labels = vec![0usize, 2, 4];
                tape.cross_entropy_mean(h, &labels)
            },
            1e-4,
        );
    }

    #[test]
    fn gradients_through_gated_residual() {
        let mut rng = rng_from(2);
        let mut leaves = vec![
            random_matrix(&mut rng, 4, 6),
            random_matrix(&mut rng, 6, 6),
            random_matrix(&mut rng, 6, 6),
            random_matrix(&mut rng, 1, 6),
        ];
        finite_difference_check(
            &mut leaves,
            |tape, ids| {
                let value = tape.matmul(ids[0], ids[1]);
                let gate_pre = tape.matmul(ids[0], ids[2]);
                let gate_pre = tape.add_bias(gate_pre, ids[3]);
                let gate = tape.sigmoid(gate_pre);
                let gated = tape.mul(value, gate);
                let residual = tape.add(ids[0], gated);
                let labels = vec![1usize, 0, 3, 5];
                tape.cross_entropy_mean(residual, &labels)
            },
            1e-4,
        );
    }

    #[test]
    fn gradients_through_sym_info_nce() {
        let mut rng = rng_from(3);
        let mut leaves = vec![
            random_matrix(&mut rng, 4, 5),
            random_matrix(&mut rng, 4, 5),
        ];
        finite_difference_check(
            &mut leaves,
            |tape, ids| {
                let xn = tape.row_l2_normalize(ids[0]);
                let yn = tape.row_l2_normalize(ids[1]);
                let sim = tape.matmul_nt(xn, yn);
                let sim = tape.scale(sim, 1.0 / 0.07);
                tape.sym_info_nce(sim)
            },
            1e-4,
        );
    }

    #[test]
    fn gradients_through_concat_and_combined_losses() {
        let mut rng = rng_from(4);
        let mut leaves = vec![
            random_matrix(&mut rng, 3, 4),
            random_matrix(&mut rng, 3, 2),
            random_matrix(&mut rng, 6, 3),
        ];
        finite_difference_check(
            &mut leaves,
            |tape, ids| {
                let joined = tape.concat_cols(&[ids[0], ids[1]]);
                let logits = tape.matmul(joined, ids[2]);
                let ce = tape.cross_entropy_mean(logits, &[0, 1, 2]);
                let xn = tape.row_l2_normalize(joined);
                let sim = tape.matmul_nt(xn, xn);
                let sim = tape.scale(sim, 2.0);
                let nce = tape.sym_info_nce(sim);
                tape.add_scaled(&[(ce, 1.0), (nce, 0.5)])
            },
            1e-4,
        );
    }

    #[test]
    fn dropout_mask_scales_survivors() {
        let mut tape = Tape::new();
        let x = tape.leaf(Array2::ones((50, 40)), true);
        let mut rng = rng_from(9);
        let dropped = tape.dropout(x, 0.25, &mut rng);
        let value = tape.value(dropped);
        let mut kept = 0usize;
        for &v in value.iter() {
            assert!(v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-12);
            if v != 0.0 {
                kept += 1;
            }
        }
        let frac = kept as f64 / 2000.0;
        assert!((frac - 0.75).abs() < 0.05, "kept fraction {frac}");
    }

    #[test]
    fn zero_dropout_is_identity_node() {
        let mut tape = Tape::new();
        let x = tape.leaf(arr2(&[[1.0, 2.0]]), false);
        let mut rng = rng_from(1);
        let y = tape.dropout(x, 0.0, &mut rng);
        assert_eq!(x, y);
    }

    #[test]
    fn no_grad_leaves_receive_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(arr2(&[[1.0, -1.0], [0.5, 2.0]]), false);
        let w = tape.leaf(arr2(&[[0.3, 0.1], [-0.2, 0.4]]), true);
        let y = tape.matmul(x, w);
        let loss = tape.cross_entropy_mean(y, &[0, 1]);
        let grads = tape.backward(loss);
        assert!(grads[x].is_none());
        assert!(grads[w].is_some());
    }
}
