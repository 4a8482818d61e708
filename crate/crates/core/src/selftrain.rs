//! Pseudo-label generation by two-model intersection.
//!
//! Both models score every unlabeled record in eval mode. A label is
//! accepted only when the argmaxes agree and the smaller of the two
//! confidences clears the class threshold (0.99 for the majority classes,
//! 0.85 for worried/surprise). Every record yields exactly one decision
//! record, rejected ones included, so the output file is auditable.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ClassHistogram, EmotionLabel, FeatureRecord, Origin};
use crate::ensemble::VotingConfig;
use crate::error::{Error, Result};
use crate::network::baseline::BaselineModel;
use crate::network::EncoderBundle;
use crate::predict::{argmax_label, baseline_probs, main_confidences};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub thresholds: BTreeMap<EmotionLabel, f64>,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        let mut thresholds = BTreeMap::new();
        for label in [
            EmotionLabel::Happy,
            EmotionLabel::Neutral,
            EmotionLabel::Angry,
            EmotionLabel::Sad,
        ] {
            thresholds.insert(label, 0.99);
        }
        for label in [EmotionLabel::Worried, EmotionLabel::Surprise] {
            thresholds.insert(label, 0.85);
        }
        ThresholdPolicy { thresholds }
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        for label in EmotionLabel::ALL {
            match self.thresholds.get(&label) {
                Some(&t) if t > 0.0 && t <= 1.0 => {}
                Some(&t) => {
                    return Err(Error::config(format!(
                        "threshold for {label} must be in (0, 1], got {t}"
                    )))
                }
                None => {
                    return Err(Error::config(format!("missing threshold for class {label}")))
                }
            }
        }
        Ok(())
    }

    pub fn threshold(&self, label: EmotionLabel) -> f64 {
        self.thresholds[&label]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Accepted,
    AgreementFailed,
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    pub sample_id: String,
    /// Defined only when both argmaxes match.
    pub agreed_label: Option<EmotionLabel>,
    /// Main model's confidence: the renormalized soft-vote aggregate of
    /// its own argmax class.
    pub conf_main: f64,
    /// Baseline softmax probability of its own argmax class.
    pub conf_baseline: f64,
    pub decision: Decision,
    pub reason: Reason,
}

/// Scores the pool with both models and applies the intersection rule.
pub fn generate_pseudo_labels(
    main: &EncoderBundle,
    voting: &VotingConfig,
    baseline: &BaselineModel,
    pool: &[FeatureRecord],
    policy: &ThresholdPolicy,
) -> Result<Vec<PseudoLabelRecord>> {
    policy.validate()?;
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let refs: Vec<&FeatureRecord> = pool.iter().collect();
    let main_scores = main_confidences(main, voting, &refs)?;
    let base_scores = baseline_probs(baseline, &refs)?;

    let mut out = Vec::with_capacity(pool.len());
    for ((record, main_dist), base_dist) in refs.iter().zip(&main_scores).zip(&base_scores) {
        let main_label = argmax_label(main_dist)?;
        let base_label = argmax_label(base_dist)?;
        let conf_main = main_dist[main_label.index()];
        let conf_baseline = base_dist[base_label.index()];

        let (agreed_label, decision, reason) = if main_label != base_label {
            (None, Decision::Rejected, Reason::AgreementFailed)
        } else {
            let agreed = main_label;
            let min_conf = conf_main.min(conf_baseline);
            if min_conf >= policy.threshold(agreed) {
                (Some(agreed), Decision::Accepted, Reason::Accepted)
            } else {
                (Some(agreed), Decision::Rejected, Reason::BelowThreshold)
            }
        };
        out.push(PseudoLabelRecord {
            sample_id: record.id.clone(),
            agreed_label,
            conf_main,
            conf_baseline,
            decision,
            reason,
        });
    }
    Ok(out)
}

/// Accepted counts per class.
pub fn pseudo_label_summary(records: &[PseudoLabelRecord]) -> ClassHistogram {
    let mut hist = ClassHistogram::default();
    for record in records {
        if record.decision == Decision::Accepted {
            if let Some(label) = record.agreed_label {
                hist.counts[label.index()] += 1;
            }
        }
    }
    hist
}

/// Materializes accepted decisions as labeled feature records
/// (`origin = pseudo`), ready to append to a training set.
pub fn accepted_records(
    pool: &[FeatureRecord],
    decisions: &[PseudoLabelRecord],
) -> Result<Vec<FeatureRecord>> {
    let accepted: BTreeMap<&str, EmotionLabel> = decisions
        .iter()
        .filter(|d| d.decision == Decision::Accepted)
        .map(|d| {
            let label = d
                .agreed_label
                .ok_or_else(|| Error::contract(format!("accepted `{}` without a label", d.sample_id)))?;
            Ok((d.sample_id.as_str(), label))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(accepted.len());
    let mut seen = HashSet::new();
    for record in pool {
        if let Some(&label) = accepted.get(record.id.as_str()) {
            let mut labeled = record.clone();
            labeled.label = Some(label);
            labeled.origin = Origin::Pseudo;
            seen.insert(record.id.as_str());
            out.push(labeled);
        }
    }
    if seen.len() != accepted.len() {
        return Err(Error::contract(
            "accepted pseudo labels reference ids missing from the pool".to_string(),
        ));
    }
    Ok(out)
}

pub fn save_pseudo_labels(records: &[PseudoLabelRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::format(format!("serializing pseudo label `{}`: {e}", record.sample_id)))?;
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_pseudo_labels(path: &Path) -> Result<Vec<PseudoLabelRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PseudoLabelRecord = serde_json::from_str(&line).map_err(|e| {
            Error::format(format!("{}:{}: malformed pseudo label: {e}", path.display(), lineno + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Exhaustive soundness audit: every accepted record satisfies argmax
/// agreement and the min-confidence threshold, and no accepted id appears
/// in the validation id set.
pub fn audit_decisions(
    decisions: &[PseudoLabelRecord],
    policy: &ThresholdPolicy,
    validation_ids: &HashSet<String>,
) -> Result<()> {
    for d in decisions {
        if d.decision == Decision::Accepted {
            let label = d.agreed_label.ok_or_else(|| {
                Error::validation(format!("accepted `{}` has no agreed label", d.sample_id))
            })?;
            if d.reason != Reason::Accepted {
                return Err(Error::validation(format!(
                    "accepted `{}` carries reason {:?}",
                    d.sample_id, d.reason
                )));
            }
            let min_conf = d.conf_main.min(d.conf_baseline);
            if min_conf < policy.threshold(label) {
                return Err(Error::validation(format!(
                    "accepted `{}` below threshold: {} < {}",
                    d.sample_id,
                    min_conf,
                    policy.threshold(label)
                )));
            }
            if validation_ids.contains(&d.sample_id) {
                return Err(Error::validation(format!(
                    "accepted `{}` leaks into the validation set",
                    d.sample_id
                )));
            }
        }
    }
    Ok(())
}
