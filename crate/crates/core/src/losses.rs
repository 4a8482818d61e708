//! Training objectives.
//!
//! Symmetric InfoNCE between batches of embeddings is the shared
//! primitive: the intra-modality loss contrasts clean against noised
//! specificity embeddings per modality (average of 3 terms), the
//! inter-modality loss contrasts all single/pair combinations of the
//! invariant embeddings (average of 6 terms), and the supervised loss
//! sums cross-entropy over the four classifier heads.
//!
//! Embeddings are L2-normalized before inner products by default; raw dot
//! products are scale-degenerate and can be restored with
//! `normalize = false` for fidelity experiments.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{EmotionLabel, Modality};
use crate::error::{Error, Result};
use crate::network::tape::{NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    /// Intra-modality temperatures, indexed v/a/t.
    pub tau_intra: [f64; 3],
    /// Temperature for single-vs-single inter-modality terms.
    pub tau_pair: f64,
    /// Temperature for one-vs-two (combination) terms.
    pub tau_combo: f64,
    pub normalize: bool,
    pub lambda_intra: f64,
    pub lambda_imc: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            tau_intra: [0.07; 3],
            tau_pair: 0.07,
            tau_combo: 0.07,
            normalize: true,
            lambda_intra: 1.0,
            lambda_imc: 1.0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        let taus = self
            .tau_intra
            .iter()
            .chain([&self.tau_pair, &self.tau_combo]);
        for &tau in taus {
            if tau <= 0.0 || !tau.is_finite() {
                return Err(Error::config("contrastive temperatures must be positive"));
            }
        }
        if self.lambda_intra < 0.0 || self.lambda_imc < 0.0 {
            return Err(Error::config("loss weights must be non-negative"));
        }
        Ok(())
    }
}

fn check_pair(x: &Array2<f64>, y: &Array2<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::contract(format!(
            "contrastive batch size mismatch: {} vs {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::contract(format!(
            "contrastive width mismatch: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::contract(
            "symmetric NCE needs a batch of at least 2".to_string(),
        ));
    }
    Ok(())
}

/// Tape-level symmetric InfoNCE between two aligned batches: matched rows
/// are positives, both softmax directions are averaged over the batch and
/// summed.
pub fn info_nce_symmetric_node(
    tape: &mut Tape,
    x: NodeId,
    y: NodeId,
    tau: f64,
    normalize: bool,
) -> Result<NodeId> {
    check_pair(tape.value(x), tape.value(y))?;
    if tau <= 0.0 {
        return Err(Error::config("temperature must be positive".to_string()));
    }
    let (xn, yn) = if normalize {
        (tape.row_l2_normalize(x), tape.row_l2_normalize(y))
    } else {
        (x, y)
    };
    let sim = tape.matmul_nt(xn, yn);
    let sim = tape.scale(sim, 1.0 / tau);
    Ok(tape.sym_info_nce(sim))
}

/// Value-level symmetric InfoNCE.
pub fn info_nce_symmetric(x: &Array2<f64>, y: &Array2<f64>, tau: f64, normalize: bool) -> Result<f64> {
    let mut tape = Tape::new();
    let xid = tape.leaf(x.clone(), false);
    let yid = tape.leaf(y.clone(), false);
    let loss = info_nce_symmetric_node(&mut tape, xid, yid, tau, normalize)?;
    Ok(tape.scalar(loss))
}

/// Intra-modality contrastive loss: average over the three modalities of
/// symmetric NCE between clean and noised specificity embeddings.
pub fn intra_modality_loss_node(
    tape: &mut Tape,
    spec: [NodeId; 3],
    spec_noised: [NodeId; 3],
    cfg: &ContrastiveConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut terms = Vec::with_capacity(3);
    for m in Modality::ALL {
        let i = m.index();
        let term = info_nce_symmetric_node(
            tape,
            spec[i],
            spec_noised[i],
            cfg.tau_intra[i],
            cfg.normalize,
        )?;
        terms.push((term, 1.0 / 3.0));
    }
    Ok(tape.add_scaled(&terms))
}

pub fn intra_modality_loss(
    spec: [&Array2<f64>; 3],
    spec_noised: [&Array2<f64>; 3],
    cfg: &ContrastiveConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let spec_ids = [
        tape.leaf(spec[0].clone(), false),
        tape.leaf(spec[1].clone(), false),
        tape.leaf(spec[2].clone(), false),
    ];
    let noised_ids = [
        tape.leaf(spec_noised[0].clone(), false),
        tape.leaf(spec_noised[1].clone(), false),
        tape.leaf(spec_noised[2].clone(), false),
    ];
    let loss = intra_modality_loss_node(&mut tape, spec_ids, noised_ids, cfg)?;
    Ok(tape.scalar(loss))
}

/// Projected pair embeddings, keyed by the concatenation order used to
/// build them.
pub struct PairNodes {
    pub at: NodeId,
    pub vt: NodeId,
    pub av: NodeId,
}

/// Inter-modality combinatorial contrastive loss: the three single-single
/// terms (v,a), (v,t), (a,t) plus the three one-vs-two terms pairing each
/// modality with the projected concatenation of the other two, averaged
/// over all six.
pub fn inter_modality_loss_node(
    tape: &mut Tape,
    inv: [NodeId; 3],
    pair: &PairNodes,
    cfg: &ContrastiveConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let (v, a, t) = (inv[0], inv[1], inv[2]);
    let singles = [(v, a), (v, t), (a, t)];
    let combos = [(v, pair.at), (a, pair.vt), (t, pair.av)];
    let mut terms = Vec::with_capacity(6);
    for (x, y) in singles {
        let term = info_nce_symmetric_node(tape, x, y, cfg.tau_pair, cfg.normalize)?;
        terms.push((term, 1.0 / 6.0));
    }
    for (x, y) in combos {
        let term = info_nce_symmetric_node(tape, x, y, cfg.tau_combo, cfg.normalize)?;
        terms.push((term, 1.0 / 6.0));
    }
    Ok(tape.add_scaled(&terms))
}

pub fn inter_modality_loss(
    inv: [&Array2<f64>; 3],
    pair_at: &Array2<f64>,
    pair_vt: &Array2<f64>,
    pair_av: &Array2<f64>,
    cfg: &ContrastiveConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let inv_ids = [
        tape.leaf(inv[0].clone(), false),
        tape.leaf(inv[1].clone(), false),
        tape.leaf(inv[2].clone(), false),
    ];
    let pair = PairNodes {
        at: tape.leaf(pair_at.clone(), false),
        vt: tape.leaf(pair_vt.clone(), false),
        av: tape.leaf(pair_av.clone(), false),
    };
    let loss = inter_modality_loss_node(&mut tape, inv_ids, &pair, cfg)?;
    Ok(tape.scalar(loss))
}

/// Supervised loss: cross-entropy summed over the four heads, each term
/// averaged over the batch.
pub fn classification_loss_node(
    tape: &mut Tape,
    logits: [NodeId; 4],
    labels: &[EmotionLabel],
) -> Result<NodeId> {
    if labels.is_empty() {
        return Err(Error::contract("classification loss needs at least one sample".to_string()));
    }
    let indices: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    for id in logits {
        if tape.value(id).nrows() != labels.len() {
            return Err(Error::contract(format!(
                "classification loss: {} logit rows for {} labels",
                tape.value(id).nrows(),
                labels.len()
            )));
        }
    }
    let mut terms = Vec::with_capacity(4);
    for id in logits {
        let ce = tape.cross_entropy_mean(id, &indices);
        terms.push((ce, 1.0));
    }
    Ok(tape.add_scaled(&terms))
}

pub fn classification_loss(logits: [&Array2<f64>; 4], labels: &[EmotionLabel]) -> Result<f64> {
    let mut tape = Tape::new();
    let ids = [
        tape.leaf(logits[0].clone(), false),
        tape.leaf(logits[1].clone(), false),
        tape.leaf(logits[2].clone(), false),
        tape.leaf(logits[3].clone(), false),
    ];
    let loss = classification_loss_node(&mut tape, ids, labels)?;
    Ok(tape.scalar(loss))
}

/// Pretraining objective: lambda_intra * L_intra + lambda_imc * L_imc.
/// The intra term is absent when no noised views exist (noise augmentation
/// disabled).
pub fn pretrain_loss_node(
    tape: &mut Tape,
    intra: Option<NodeId>,
    imc: NodeId,
    cfg: &ContrastiveConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    let mut terms = vec![(imc, cfg.lambda_imc)];
    if let Some(intra) = intra {
        terms.push((intra, cfg.lambda_intra));
    }
    Ok(tape.add_scaled(&terms))
}
