//! Batched eval-mode prediction helpers shared by training-time model
//! selection, pseudo-labeling, and the predict/evaluate commands.

use std::collections::BTreeMap;

use crate::data::{EmotionLabel, FeatureRecord, CLASS_COUNT};
use crate::ensemble::{soft_vote, Head, VoteResult, VotingConfig};
use crate::error::{Error, Result};
use crate::metrics::compute_waf;
use crate::network::baseline::BaselineModel;
use crate::network::{softmax_rows, EncoderBundle};

fn row_to_array(row: ndarray::ArrayView1<'_, f64>) -> [f64; CLASS_COUNT] {
    let mut out = [0.0; CLASS_COUNT];
    for (slot, &v) in out.iter_mut().zip(row.iter()) {
        *slot = v;
    }
    out
}

/// Per-record softmax scores for each of the four heads.
pub fn head_probs(
    bundle: &EncoderBundle,
    records: &[&FeatureRecord],
) -> Result<Vec<BTreeMap<Head, [f64; CLASS_COUNT]>>> {
    let logits = bundle.eval_logits(records)?;
    let probs: Vec<_> = logits.iter().map(softmax_rows).collect();
    let mut out = Vec::with_capacity(records.len());
    for r in 0..records.len() {
        let mut map = BTreeMap::new();
        for (h, head) in Head::ALL.iter().enumerate() {
            map.insert(*head, row_to_array(probs[h].row(r)));
        }
        out.push(map);
    }
    Ok(out)
}

/// Weighted soft-vote results for a record list.
pub fn vote_results(
    bundle: &EncoderBundle,
    voting: &VotingConfig,
    records: &[&FeatureRecord],
) -> Result<Vec<VoteResult>> {
    head_probs(bundle, records)?
        .iter()
        .map(|scores| soft_vote(scores, voting))
        .collect()
}

pub fn predict_labels(
    bundle: &EncoderBundle,
    voting: &VotingConfig,
    records: &[&FeatureRecord],
) -> Result<Vec<EmotionLabel>> {
    Ok(vote_results(bundle, voting, records)?
        .into_iter()
        .map(|v| v.winner)
        .collect())
}

/// The main model's confidence distribution: the soft-vote aggregate
/// renormalized over classes (the weights sum out, so this is a proper
/// distribution).
pub fn main_confidences(
    bundle: &EncoderBundle,
    voting: &VotingConfig,
    records: &[&FeatureRecord],
) -> Result<Vec<[f64; CLASS_COUNT]>> {
    let results = vote_results(bundle, voting, records)?;
    Ok(results
        .into_iter()
        .map(|r| {
            let total: f64 = r.aggregate.iter().sum();
            let mut scores = r.aggregate;
            for s in scores.iter_mut() {
                *s /= total;
            }
            scores
        })
        .collect())
}

/// Baseline softmax probabilities per record.
pub fn baseline_probs(
    model: &BaselineModel,
    records: &[&FeatureRecord],
) -> Result<Vec<[f64; CLASS_COUNT]>> {
    let probs = model.eval_probs(records)?;
    Ok((0..records.len()).map(|r| row_to_array(probs.row(r))).collect())
}

fn gold_labels(records: &[&FeatureRecord]) -> Result<Vec<EmotionLabel>> {
    records
        .iter()
        .map(|r| {
            r.label.ok_or_else(|| {
                Error::contract(format!("record `{}` has no gold label for evaluation", r.id))
            })
        })
        .collect()
}

pub fn argmax_label(probs: &[f64; CLASS_COUNT]) -> Result<EmotionLabel> {
    let mut best = 0usize;
    for c in 1..CLASS_COUNT {
        if probs[c] > probs[best] {
            best = c;
        }
    }
    EmotionLabel::from_index(best)
}

/// Soft-vote validation WAF of the main model.
pub fn validation_waf(
    bundle: &EncoderBundle,
    voting: &VotingConfig,
    records: &[&FeatureRecord],
) -> Result<f64> {
    let gold = gold_labels(records)?;
    let predicted = predict_labels(bundle, voting, records)?;
    Ok(compute_waf(&gold, &predicted)?.waf)
}

/// Argmax-of-softmax validation WAF of the baseline model.
pub fn baseline_validation_waf(model: &BaselineModel, records: &[&FeatureRecord]) -> Result<f64> {
    let gold = gold_labels(records)?;
    let probs = baseline_probs(model, records)?;
    let predicted: Vec<EmotionLabel> = probs.iter().map(argmax_label).collect::<Result<_>>()?;
    Ok(compute_waf(&gold, &predicted)?.waf)
}
