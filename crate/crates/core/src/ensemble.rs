//! Weighted soft voting over the four classifier heads.
//!
//! Aggregates per-class confidence scores as a weighted sum across heads
//! and picks the argmax; ties break toward the lower class index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{EmotionLabel, CLASS_COUNT};
use crate::error::{Error, Result};

/// The four classifier heads: acoustic, visual, text, and fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    A,
    V,
    T,
    F,
}

impl Head {
    pub const ALL: [Head; 4] = [Head::A, Head::V, Head::T, Head::F];

    pub fn index(self) -> usize {
        match self {
            Head::A => 0,
            Head::V => 1,
            Head::T => 2,
            Head::F => 3,
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Head::A => "A",
            Head::V => "V",
            Head::T => "T",
            Head::F => "F",
        };
        f.write_str(s)
    }
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Head::A),
            "v" => Ok(Head::V),
            "t" => Ok(Head::T),
            "f" => Ok(Head::F),
            other => Err(Error::config(format!("unknown classifier head `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingConfig {
    pub weights: BTreeMap<Head, f64>,
}

impl Default for VotingConfig {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(Head::A, 0.7);
        weights.insert(Head::V, 0.5);
        weights.insert(Head::T, 0.4);
        weights.insert(Head::F, 0.7);
        VotingConfig { weights }
    }
}

impl VotingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.values().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::config("voting weights must be finite and non-negative"));
        }
        if !self.weights.values().any(|&w| w > 0.0) {
            return Err(Error::config("at least one voting weight must be positive"));
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    pub aggregate: [f64; CLASS_COUNT],
    pub winner: EmotionLabel,
    /// Winner score minus runner-up score; non-negative.
    pub margin: f64,
}

/// Weighted soft vote over per-head softmax scores.
///
/// Every configured head must be present and each score vector must sum to
/// one (within 1e-6). The winner is the argmax of the weighted aggregate,
/// ties broken by class index order.
pub fn soft_vote(
    confidences: &BTreeMap<Head, [f64; CLASS_COUNT]>,
    cfg: &VotingConfig,
) -> Result<VoteResult> {
    cfg.validate()?;
    let mut aggregate = [0.0f64; CLASS_COUNT];
    for (&head, &weight) in &cfg.weights {
        let scores = confidences.get(&head).ok_or_else(|| {
            Error::contract(format!("soft_vote: missing confidence vector for head {head}"))
        })?;
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::contract(format!(
                "soft_vote: head {head} scores sum to {sum}, expected 1"
            )));
        }
        for (agg, &s) in aggregate.iter_mut().zip(scores) {
            *agg += weight * s;
        }
    }

    let mut winner = 0usize;
    for c in 1..CLASS_COUNT {
        if aggregate[c] > aggregate[winner] {
            winner = c;
        }
    }
    let mut runner_up = f64::NEG_INFINITY;
    for (c, &score) in aggregate.iter().enumerate() {
        if c != winner && score > runner_up {
            runner_up = score;
        }
    }
    Ok(VoteResult {
        aggregate,
        winner: EmotionLabel::from_index(winner)?,
        margin: aggregate[winner] - runner_up,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn head_map(a: [f64; 6], v: [f64; 6], t: [f64; 6], f: [f64; 6]) -> BTreeMap<Head, [f64; 6]> {
        let mut m = BTreeMap::new();
        m.insert(Head::A, a);
        m.insert(Head::V, v);
        m.insert(Head::T, t);
        m.insert(Head::F, f);
        m
    }

    fn one_hot(k: usize) -> [f64; 6] {
        let mut v = [0.0; 6];
        v[k] = 1.0;
        v
    }

    #[test]
    fn unanimous_one_hot_margin_is_weight_sum() {
        let cfg = VotingConfig::default();
        for k in 0..6 {
            let scores = head_map(one_hot(k), one_hot(k), one_hot(k), one_hot(k));
            let result = soft_vote(&scores, &cfg).unwrap();
            assert_eq!(result.winner.index(), k);
            assert!((result.margin - cfg.total_weight()).abs() < 1e-12);
        }
    }

    #[test]
    fn three_class_weighted_sum_oracle() {
        let cfg = VotingConfig::default();
        let scores = head_map(
            [0.6, 0.3, 0.1, 0.0, 0.0, 0.0],
            [0.2, 0.7, 0.1, 0.0, 0.0, 0.0],
            [0.1, 0.8, 0.1, 0.0, 0.0, 0.0],
            [0.5, 0.4, 0.1, 0.0, 0.0, 0.0],
        );
        let result = soft_vote(&scores, &cfg).unwrap();
        assert!((result.aggregate[0] - 0.91).abs() < 1e-12);
        assert!((result.aggregate[1] - 1.16).abs() < 1e-12);
        assert!((result.aggregate[2] - 0.23).abs() < 1e-12);
        assert_eq!(result.winner.index(), 1);
        assert!((result.margin - 0.25).abs() < 1e-12);
    }

    #[test]
    fn uniform_weight_scaling_preserves_ranking() {
        let mut rng = crate::seeds::rng_from(8);
        let cfg = VotingConfig::default();
        let mut scaled = VotingConfig::default();
        for w in scaled.weights.values_mut() {
            *w *= 10.0;
        }
        for _ in 0..200 {
            let mut draw = || {
                let mut v = [0.0f64; 6];
                let mut sum = 0.0;
                for x in v.iter_mut() {
                    *x = rng.random_range(0.0..1.0);
                    sum += *x;
                }
                for x in v.iter_mut() {
                    *x /= sum;
                }
                v
            };
            let scores = head_map(draw(), draw(), draw(), draw());
            let base = soft_vote(&scores, &cfg).unwrap();
            let scaled_result = soft_vote(&scores, &scaled).unwrap();
            assert_eq!(base.winner, scaled_result.winner);
            // Full ranking is preserved, not just the winner.
            let rank = |agg: &[f64; 6]| {
                let mut idx: Vec<usize> = (0..6).collect();
                idx.sort_by(|&i, &j| agg[j].partial_cmp(&agg[i]).unwrap().then(i.cmp(&j)));
                idx
            };
            assert_eq!(rank(&base.aggregate), rank(&scaled_result.aggregate));
        }
    }

    #[test]
    fn missing_head_is_contract_error() {
        let mut scores = head_map(one_hot(0), one_hot(0), one_hot(0), one_hot(0));
        scores.remove(&Head::T);
        let err = soft_vote(&scores, &VotingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn unnormalized_scores_are_rejected() {
        let mut bad = one_hot(0);
        bad[1] = 0.5;
        let scores = head_map(bad, one_hot(0), one_hot(0), one_hot(0));
        assert!(soft_vote(&scores, &VotingConfig::default()).is_err());
    }

    #[test]
    fn all_zero_weights_is_config_error() {
        let mut cfg = VotingConfig::default();
        for w in cfg.weights.values_mut() {
            *w = 0.0;
        }
        let scores = head_map(one_hot(0), one_hot(0), one_hot(0), one_hot(0));
        assert!(matches!(soft_vote(&scores, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn tie_breaks_toward_lower_class_index() {
        // Heads split evenly between classes 2 and 4 under equal weights.
        let mut cfg = VotingConfig::default();
        for w in cfg.weights.values_mut() {
            *w = 1.0;
        }
        let scores = head_map(one_hot(4), one_hot(2), one_hot(4), one_hot(2));
        let result = soft_vote(&scores, &cfg).unwrap();
        assert_eq!(result.winner.index(), 2);
        assert_eq!(result.margin, 0.0);
    }
}
