//! Encoders and classifier heads.
//!
//! Three modality specificity encoders (stacks of pre-norm residual blocks:
//! a gated linear map standing in for length-1 self-attention, plus a
//! feed-forward block), one invariant encoder shared across modalities, a
//! pair-combination projection, and four classifier heads (A, V, T, F).
//! Parameters live in a flat named store; forward passes run on a `Tape`
//! so both training and the gradient checks share one code path.

pub mod baseline;
pub mod checkpoint;
pub mod tape;

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dims, FeatureRecord, Modality, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::seeds::rng_from;
use tape::{NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub d_in: Dims,
    /// Width of the modality-specific embeddings.
    pub d_spec: usize,
    /// Residual blocks per specificity encoder.
    pub n_spec_layers: usize,
    /// Width of the shared invariant embedding.
    pub d_inv: usize,
    pub n_classes: usize,
    pub dropout: f64,
    pub init_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            d_in: Dims::new(768, 1024, 5120),
            d_spec: 256,
            n_spec_layers: 2,
            d_inv: 128,
            n_classes: CLASS_COUNT,
            dropout: 0.3,
            init_seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_in.v == 0 || self.d_in.a == 0 || self.d_in.t == 0 {
            return Err(Error::config("network: input dims must be >= 1"));
        }
        if self.d_spec == 0 || self.d_inv == 0 || self.n_spec_layers == 0 {
            return Err(Error::config("network: widths and layer count must be >= 1"));
        }
        if self.n_classes != CLASS_COUNT {
            return Err(Error::config(format!(
                "network: n_classes must be {CLASS_COUNT}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("network: dropout must be in [0, 1)"));
        }
        Ok(())
    }

    fn ffn_hidden(&self) -> usize {
        2 * self.d_spec
    }
}

/// Flat, ordered store of named parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn value(&self, i: usize) -> &Array2<f64> {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.values[i]
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index.get(name).map(|&i| &self.values[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn shapes(&self) -> Vec<(String, (usize, usize))> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| (n.clone(), v.dim()))
            .collect()
    }

    /// Inserts every parameter into a tape; ids align with store order.
    pub fn insert_into(&self, tape: &mut Tape, needs_grad: bool) -> TapeParams {
        let ids = self
            .values
            .iter()
            .map(|v| tape.leaf(v.clone(), needs_grad))
            .collect();
        TapeParams {
            ids,
            index: self.index.clone(),
        }
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Node ids of a `ParamSet` inserted into one tape.
pub struct TapeParams {
    pub ids: Vec<NodeId>,
    index: HashMap<String, usize>,
}

impl TapeParams {
    pub fn id(&self, name: &str) -> NodeId {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    fn node(&self, name: &str) -> NodeId {
        self.ids[self.id(name)]
    }
}

/// Enumerates the expected parameter tensors for a config, in the fixed
/// construction order. Initialization and the shape audit both derive
/// from this single list.
pub fn expected_shapes(cfg: &NetworkConfig) -> Vec<(String, (usize, usize))> {
    let mut shapes = Vec::new();
    let d = cfg.d_spec;
    let ffn = cfg.ffn_hidden();
    for m in Modality::ALL {
        let prefix = format!("spec_{}", m.key());
        shapes.push((format!("{prefix}.in_proj.w"), (cfg.d_in.get(m), d)));
        shapes.push((format!("{prefix}.in_proj.b"), (1, d)));
        for l in 0..cfg.n_spec_layers {
            let bp = format!("{prefix}.block{l}");
            shapes.push((format!("{bp}.ln1.g"), (1, d)));
            shapes.push((format!("{bp}.ln1.b"), (1, d)));
            shapes.push((format!("{bp}.gate_value.w"), (d, d)));
            shapes.push((format!("{bp}.gate_value.b"), (1, d)));
            shapes.push((format!("{bp}.gate.w"), (d, d)));
            shapes.push((format!("{bp}.gate.b"), (1, d)));
            shapes.push((format!("{bp}.ln2.g"), (1, d)));
            shapes.push((format!("{bp}.ln2.b"), (1, d)));
            shapes.push((format!("{bp}.ffn1.w"), (d, ffn)));
            shapes.push((format!("{bp}.ffn1.b"), (1, ffn)));
            shapes.push((format!("{bp}.ffn2.w"), (ffn, d)));
            shapes.push((format!("{bp}.ffn2.b"), (1, d)));
        }
        shapes.push((format!("{prefix}.final_norm.g"), (1, d)));
        shapes.push((format!("{prefix}.final_norm.b"), (1, d)));
    }
    shapes.push(("inv.fc1.w".into(), (d, cfg.d_inv)));
    shapes.push(("inv.fc1.b".into(), (1, cfg.d_inv)));
    shapes.push(("inv.fc2.w".into(), (cfg.d_inv, cfg.d_inv)));
    shapes.push(("inv.fc2.b".into(), (1, cfg.d_inv)));
    shapes.push(("pair_proj.w".into(), (2 * cfg.d_inv, cfg.d_inv)));
    shapes.push(("pair_proj.b".into(), (1, cfg.d_inv)));
    for (head, input) in [("a", d), ("v", d), ("t", d), ("f", 3 * d)] {
        shapes.push((format!("head_{head}.w"), (input, cfg.n_classes)));
        shapes.push((format!("head_{head}.b"), (1, cfg.n_classes)));
    }
    shapes
}

/// Draws one parameter tensor: Xavier-uniform for weights, ones for norm
/// gains, zeros for biases and norm shifts.
pub(crate) fn init_tensor_for(name: &str, shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    if name.ends_with(".w") {
        let (fan_in, fan_out) = shape;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Array2::from_shape_fn(shape, |_| rng.random_range(-limit..limit))
    } else if name.ends_with(".g") {
        Array2::ones(shape)
    } else {
        Array2::zeros(shape)
    }
}

/// All learnable parameters of the main model.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBundle {
    pub cfg: NetworkConfig,
    pub params: ParamSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Batched modality features (rows are samples), optionally with noised
/// views aligned row-for-row.
pub struct BatchInput {
    pub features: [Array2<f64>; 3],
    pub noised: Option<[Array2<f64>; 3]>,
}

impl BatchInput {
    pub fn from_records(records: &[&FeatureRecord]) -> Self {
        let features = [
            records_to_matrix(records, Modality::Visual),
            records_to_matrix(records, Modality::Acoustic),
            records_to_matrix(records, Modality::Text),
        ];
        BatchInput { features, noised: None }
    }

    pub fn len(&self) -> usize {
        self.features[0].nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn records_to_matrix(records: &[&FeatureRecord], m: Modality) -> Array2<f64> {
    let rows = records.len();
    let cols = records.first().map(|r| r.feature(m).len()).unwrap_or(0);
    Array2::from_shape_fn((rows, cols), |(r, c)| records[r].feature(m)[c] as f64)
}

/// Node ids produced by one batched forward pass.
pub struct ForwardNodes {
    pub spec: [NodeId; 3],
    pub spec_noised: Option<[NodeId; 3]>,
    pub inv: [NodeId; 3],
    pub pair_at: NodeId,
    pub pair_vt: NodeId,
    pub pair_av: NodeId,
    /// Head order: A, V, T, F.
    pub logits: [NodeId; 4],
}

/// Concrete single-record forward outputs.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub spec: [Vec<f64>; 3],
    pub spec_noised: Option<[Vec<f64>; 3]>,
    pub inv: [Vec<f64>; 3],
    pub pair_at: Vec<f64>,
    pub pair_vt: Vec<f64>,
    pub pair_av: Vec<f64>,
    /// Head order: A, V, T, F.
    pub logits: [Vec<f64>; 4],
}

impl EncoderBundle {
    /// Deterministic initialization from `cfg.init_seed`.
    pub fn init(cfg: NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from(cfg.init_seed);
        let mut params = ParamSet::new();
        for (name, shape) in expected_shapes(&cfg) {
            let tensor = init_tensor_for(&name, shape, &mut rng);
            params.push(name, tensor);
        }
        Ok(EncoderBundle { cfg, params })
    }

    /// Verifies stored parameter names and shapes against the config.
    pub fn shape_audit(&self) -> Result<Vec<(String, (usize, usize))>> {
        let expected = expected_shapes(&self.cfg);
        let actual = self.params.shapes();
        if expected != actual {
            for (e, a) in expected.iter().zip(&actual) {
                if e != a {
                    return Err(Error::validation(format!(
                        "shape audit: expected {:?}, found {:?}",
                        e, a
                    )));
                }
            }
            return Err(Error::validation(format!(
                "shape audit: expected {} tensors, found {}",
                expected.len(),
                actual.len()
            )));
        }
        Ok(expected)
    }

    fn check_batch(&self, input: &BatchInput) -> Result<()> {
        if input.is_empty() {
            return Err(Error::contract("forward: empty batch".to_string()));
        }
        for (mi, m) in Modality::ALL.iter().enumerate() {
            let want = self.cfg.d_in.get(*m);
            let got = input.features[mi].ncols();
            if got != want {
                return Err(Error::contract(format!(
                    "forward: {} features have width {got}, config says {want}",
                    m.key()
                )));
            }
            if let Some(noised) = &input.noised {
                if noised[mi].dim() != input.features[mi].dim() {
                    return Err(Error::contract(format!(
                        "forward: noised {} view shape mismatch",
                        m.key()
                    )));
                }
            }
        }
        Ok(())
    }

    /// One specificity encoder applied to a batch.
    fn spec_encoder(
        &self,
        tape: &mut Tape,
        p: &TapeParams,
        m: Modality,
        x: NodeId,
        mode: Mode,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> NodeId {
        let prefix = format!("spec_{}", m.key());
        let mut h = self.linear(tape, p, &format!("{prefix}.in_proj"), x);
        for l in 0..self.cfg.n_spec_layers {
            let bp = format!("{prefix}.block{l}");
            let n1 = tape.layer_norm(h, p.node(&format!("{bp}.ln1.g")), p.node(&format!("{bp}.ln1.b")));
            let value = self.linear(tape, p, &format!("{bp}.gate_value"), n1);
            let gate_pre = self.linear(tape, p, &format!("{bp}.gate"), n1);
            let gate = tape.sigmoid(gate_pre);
            let mut gated = tape.mul(value, gate);
            gated = self.maybe_dropout(tape, gated, mode, rng);
            h = tape.add(h, gated);

            let n2 = tape.layer_norm(h, p.node(&format!("{bp}.ln2.g")), p.node(&format!("{bp}.ln2.b")));
            let f1 = self.linear(tape, p, &format!("{bp}.ffn1"), n2);
            let f1 = tape.tanh(f1);
            let mut f2 = self.linear(tape, p, &format!("{bp}.ffn2"), f1);
            f2 = self.maybe_dropout(tape, f2, mode, rng);
            h = tape.add(h, f2);
        }
        tape.layer_norm(
            h,
            p.node(&format!("{prefix}.final_norm.g")),
            p.node(&format!("{prefix}.final_norm.b")),
        )
    }

    fn linear(&self, tape: &mut Tape, p: &TapeParams, prefix: &str, x: NodeId) -> NodeId {
        let wx = tape.matmul(x, p.node(&format!("{prefix}.w")));
        tape.add_bias(wx, p.node(&format!("{prefix}.b")))
    }

    fn maybe_dropout(
        &self,
        tape: &mut Tape,
        x: NodeId,
        mode: Mode,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> NodeId {
        if mode == Mode::Train && self.cfg.dropout > 0.0 {
            let rng = rng
                .as_deref_mut()
                .expect("train-mode forward with dropout requires an rng");
            tape.dropout(x, self.cfg.dropout, rng)
        } else {
            x
        }
    }

    fn invariant(&self, tape: &mut Tape, p: &TapeParams, spec: NodeId) -> NodeId {
        let h = self.linear(tape, p, "inv.fc1", spec);
        let h = tape.tanh(h);
        self.linear(tape, p, "inv.fc2", h)
    }

    /// Batched forward pass. Noised views, when present, run through the
    /// same specificity encoders with the same parameters.
    pub fn forward_batch(
        &self,
        tape: &mut Tape,
        p: &TapeParams,
        input: &BatchInput,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardNodes> {
        self.check_batch(input)?;
        let inputs: [NodeId; 3] = [
            tape.leaf(input.features[0].clone(), false),
            tape.leaf(input.features[1].clone(), false),
            tape.leaf(input.features[2].clone(), false),
        ];
        let spec = [
            self.spec_encoder(tape, p, Modality::Visual, inputs[0], mode, &mut rng),
            self.spec_encoder(tape, p, Modality::Acoustic, inputs[1], mode, &mut rng),
            self.spec_encoder(tape, p, Modality::Text, inputs[2], mode, &mut rng),
        ];
        let spec_noised = match &input.noised {
            Some(noised) => {
                let mut out = [0usize; 3];
                for (mi, m) in Modality::ALL.iter().enumerate() {
                    let leaf = tape.leaf(noised[mi].clone(), false);
                    out[mi] = self.spec_encoder(tape, p, *m, leaf, mode, &mut rng);
                }
                Some(out)
            }
            None => None,
        };
        let inv = [
            self.invariant(tape, p, spec[0]),
            self.invariant(tape, p, spec[1]),
            self.invariant(tape, p, spec[2]),
        ];
        let (inv_v, inv_a, inv_t) = (inv[0], inv[1], inv[2]);
        let cat_at = tape.concat_cols(&[inv_a, inv_t]);
        let cat_vt = tape.concat_cols(&[inv_v, inv_t]);
        let cat_av = tape.concat_cols(&[inv_a, inv_v]);
        let pair_at = self.linear(tape, p, "pair_proj", cat_at);
        let pair_vt = self.linear(tape, p, "pair_proj", cat_vt);
        let pair_av = self.linear(tape, p, "pair_proj", cat_av);

        let fused = tape.concat_cols(&[spec[0], spec[1], spec[2]]);
        let logits = [
            self.linear(tape, p, "head_a", spec[1]),
            self.linear(tape, p, "head_v", spec[0]),
            self.linear(tape, p, "head_t", spec[2]),
            self.linear(tape, p, "head_f", fused),
        ];
        Ok(ForwardNodes {
            spec,
            spec_noised,
            inv,
            pair_at,
            pair_vt,
            pair_av,
            logits,
        })
    }

    /// Single-record forward with concrete outputs.
    pub fn forward(
        &self,
        record: &FeatureRecord,
        noised: Option<[&[f64]; 3]>,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardOutput> {
        let dims = record.dims();
        if dims != self.cfg.d_in {
            return Err(Error::contract(format!(
                "forward: record `{}` dims {:?} do not match config {:?}",
                record.id, dims, self.cfg.d_in
            )));
        }
        let mut input = BatchInput::from_records(&[record]);
        if let Some(noised) = noised {
            let arrays: Vec<Array2<f64>> = noised
                .iter()
                .map(|v| Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector"))
                .collect();
            let [nv, na, nt]: [Array2<f64>; 3] = arrays.try_into().expect("three modalities");
            input.noised = Some([nv, na, nt]);
        }
        let mut tape = Tape::new();
        let p = self.params.insert_into(&mut tape, false);
        let nodes = self.forward_batch(&mut tape, &p, &input, mode, rng)?;
        let row = |id: NodeId| tape.value(id).row(0).to_vec();
        Ok(ForwardOutput {
            spec: [row(nodes.spec[0]), row(nodes.spec[1]), row(nodes.spec[2])],
            spec_noised: nodes
                .spec_noised
                .map(|n| [row(n[0]), row(n[1]), row(n[2])]),
            inv: [row(nodes.inv[0]), row(nodes.inv[1]), row(nodes.inv[2])],
            pair_at: row(nodes.pair_at),
            pair_vt: row(nodes.pair_vt),
            pair_av: row(nodes.pair_av),
            logits: [
                row(nodes.logits[0]),
                row(nodes.logits[1]),
                row(nodes.logits[2]),
                row(nodes.logits[3]),
            ],
        })
    }

    /// Eval-mode head logits over a record list, chunked to bound memory.
    /// Returns one (rows x classes) matrix per head in A, V, T, F order.
    pub fn eval_logits(&self, records: &[&FeatureRecord]) -> Result<[Array2<f64>; 4]> {
        const CHUNK: usize = 512;
        let n = records.len();
        let c = self.cfg.n_classes;
        let mut out: [Array2<f64>; 4] = [
            Array2::zeros((n, c)),
            Array2::zeros((n, c)),
            Array2::zeros((n, c)),
            Array2::zeros((n, c)),
        ];
        let mut offset = 0;
        for chunk in records.chunks(CHUNK) {
            let input = BatchInput::from_records(chunk);
            let mut tape = Tape::new();
            let p = self.params.insert_into(&mut tape, false);
            let nodes = self.forward_batch(&mut tape, &p, &input, Mode::Eval, None)?;
            for (h, &id) in nodes.logits.iter().enumerate() {
                out[h]
                    .slice_mut(ndarray::s![offset..offset + chunk.len(), ..])
                    .assign(tape.value(id));
            }
            offset += chunk.len();
        }
        Ok(out)
    }
}

/// Row-wise stable softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
