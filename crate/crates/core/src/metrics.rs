//! Weighted average F-score (WAF) and confusion-matrix reporting.
//!
//! WAF is the per-class F1 averaged with weights proportional to class
//! support in the gold labels; classes absent from the gold labels carry
//! zero weight.

use serde::{Deserialize, Serialize};

use crate::data::{EmotionLabel, CLASS_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub waf: f64,
    pub per_class: Vec<ClassMetrics>,
    /// confusion[true][pred], row sums equal the per-class support.
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

impl EvalReport {
    pub fn class(&self, label: EmotionLabel) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

/// Computes per-class precision/recall/F1, the confusion matrix, and the
/// support-weighted F1 average.
pub fn compute_waf(y_true: &[EmotionLabel], y_pred: &[EmotionLabel]) -> Result<EvalReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::contract(format!(
            "label/prediction length mismatch: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::contract("compute_waf requires at least one sample".to_string()));
    }

    let mut confusion = vec![vec![0usize; CLASS_COUNT]; CLASS_COUNT];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[t.index()][p.index()] += 1;
    }

    let mut per_class = Vec::with_capacity(CLASS_COUNT);
    for c in 0..CLASS_COUNT {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = (0..CLASS_COUNT).map(|r| confusion[r][c]).sum();
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let recall = if support > 0 { tp as f64 / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics { precision, recall, f1, support });
    }

    // Single division so that perfect predictions give exactly 1.0.
    let weighted: f64 = per_class.iter().map(|m| m.support as f64 * m.f1).sum();
    let waf = weighted / y_true.len() as f64;

    Ok(EvalReport {
        waf,
        per_class,
        confusion,
        n: y_true.len(),
    })
}
