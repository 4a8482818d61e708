//! Random oversampling of minority classes to configured per-class targets.
//!
//! Runs after the train/validation split and only on the training list;
//! duplicates are uniform-with-replacement copies flagged
//! `origin=duplicate` and never downsample a class.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmotionLabel, FeatureRecord, Origin};
use crate::error::{Error, Result};
use crate::seeds::rng_from;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OversampleConfig {
    /// Target count per class; classes without an entry are left unchanged.
    pub targets: BTreeMap<EmotionLabel, usize>,
    pub seed: u64,
}

impl OversampleConfig {
    pub fn new(targets: BTreeMap<EmotionLabel, usize>, seed: u64) -> Self {
        OversampleConfig { targets, seed }
    }

    /// The same target for each of the given classes.
    pub fn uniform(classes: &[EmotionLabel], target: usize, seed: u64) -> Self {
        OversampleConfig {
            targets: classes.iter().map(|&c| (c, target)).collect(),
            seed,
        }
    }

    pub fn empty(seed: u64) -> Self {
        OversampleConfig {
            targets: BTreeMap::new(),
            seed,
        }
    }
}

/// Oversamples each targeted class to `max(current, target)` records.
///
/// Originals are all retained in input order; duplicates are appended in
/// fixed class order, keep the source id plus a `#dupK` suffix, and copy
/// the source vectors bit for bit. Targets at or below the current count
/// are no-ops.
pub fn oversample(records: &[FeatureRecord], cfg: &OversampleConfig) -> Result<Vec<FeatureRecord>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); crate::data::CLASS_COUNT];
    for (i, record) in records.iter().enumerate() {
        match record.label {
            Some(label) => by_class[label.index()].push(i),
            None => {
                return Err(Error::contract(format!(
                    "oversample requires labeled records; `{}` has no label",
                    record.id
                )))
            }
        }
    }

    let mut out: Vec<FeatureRecord> = records.to_vec();
    let mut rng = rng_from(cfg.seed);
    let mut dup_counter: BTreeMap<String, usize> = BTreeMap::new();

    for label in EmotionLabel::ALL {
        let Some(&target) = cfg.targets.get(&label) else {
            continue;
        };
        let pool = &by_class[label.index()];
        let current = pool.len();
        if current == 0 || target <= current {
            continue;
        }
        for _ in 0..(target - current) {
            let source = &records[pool[rng.random_range(0..current)]];
            let k = dup_counter.entry(source.id.clone()).or_insert(0);
            *k += 1;
            let mut dup = source.clone();
            dup.id = format!("{}#dup{}", source.id, k);
            dup.origin = Origin::Duplicate;
            out.push(dup);
        }
    }
    Ok(out)
}
