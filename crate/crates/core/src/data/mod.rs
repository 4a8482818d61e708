//! Core domain types: emotion labels, per-utterance feature records, and
//! dataset splits.
//!
//! Feature vectors arrive precomputed (one vector per modality per
//! utterance) and are stored as 32-bit floats; all downstream arithmetic
//! promotes to f64.

pub mod store;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of emotion classes.
pub const CLASS_COUNT: usize = 6;

/// The six discrete emotion classes, in the fixed index order used
/// everywhere (class indices 0..=5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral,
    Angry,
    Happy,
    Sad,
    Worried,
    Surprise,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; CLASS_COUNT] = [
        EmotionLabel::Neutral,
        EmotionLabel::Angry,
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Worried,
        EmotionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        match self {
            EmotionLabel::Neutral => 0,
            EmotionLabel::Angry => 1,
            EmotionLabel::Happy => 2,
            EmotionLabel::Sad => 3,
            EmotionLabel::Worried => 4,
            EmotionLabel::Surprise => 5,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::contract(format!("class index {index} out of range 0..6")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Worried => "worried",
            EmotionLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(EmotionLabel::Neutral),
            "angry" => Ok(EmotionLabel::Angry),
            "happy" => Ok(EmotionLabel::Happy),
            "sad" => Ok(EmotionLabel::Sad),
            "worried" => Ok(EmotionLabel::Worried),
            "surprise" => Ok(EmotionLabel::Surprise),
            other => Err(Error::validation(format!("unknown emotion label `{other}`"))),
        }
    }
}

/// Input modalities, in the fixed order (visual, acoustic, text).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Acoustic,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Visual, Modality::Acoustic, Modality::Text];

    pub fn index(self) -> usize {
        match self {
            Modality::Visual => 0,
            Modality::Acoustic => 1,
            Modality::Text => 2,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Modality::Visual => "v",
            Modality::Acoustic => "a",
            Modality::Text => "t",
        }
    }
}

/// Where a training record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Human-annotated label.
    Gold,
    /// Label assigned by the two-model intersection.
    Pseudo,
    /// Oversampling duplicate of another record.
    Duplicate,
}

/// Feature dimensions per modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub v: usize,
    pub a: usize,
    pub t: usize,
}

impl Dims {
    pub fn new(v: usize, a: usize, t: usize) -> Self {
        Dims { v, a, t }
    }

    pub fn get(&self, m: Modality) -> usize {
        match m {
            Modality::Visual => self.v,
            Modality::Acoustic => self.a,
            Modality::Text => self.t,
        }
    }
}

/// One utterance: an id, three modality feature vectors, and an optional
/// gold label. Records in the unlabeled pool carry no label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub visual: Vec<f32>,
    pub acoustic: Vec<f32>,
    pub text: Vec<f32>,
    pub label: Option<EmotionLabel>,
    pub origin: Origin,
}

impl FeatureRecord {
    pub fn feature(&self, m: Modality) -> &[f32] {
        match m {
            Modality::Visual => &self.visual,
            Modality::Acoustic => &self.acoustic,
            Modality::Text => &self.text,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.visual.len(), self.acoustic.len(), self.text.len())
    }

    /// Checks finiteness and dimensions against a manifest declaration.
    pub fn validate(&self, dims: &Dims) -> Result<()> {
        for m in Modality::ALL {
            let vec = self.feature(m);
            if vec.len() != dims.get(m) {
                return Err(Error::validation(format!(
                    "record `{}`: {} vector has length {}, manifest declares {}",
                    self.id,
                    m.key(),
                    vec.len(),
                    dims.get(m)
                )));
            }
            if vec.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!(
                    "record `{}`: {} vector contains a non-finite value",
                    self.id,
                    m.key()
                )));
            }
        }
        Ok(())
    }
}

/// Per-class record counts in fixed class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassHistogram {
    pub counts: [usize; CLASS_COUNT],
}

impl ClassHistogram {
    pub fn get(&self, label: EmotionLabel) -> usize {
        self.counts[label.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn as_map(&self) -> BTreeMap<String, usize> {
        EmotionLabel::ALL
            .iter()
            .map(|&l| (l.as_str().to_string(), self.counts[l.index()]))
            .collect()
    }
}

impl Serialize for ClassHistogram {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_map().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ClassHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, usize>::deserialize(deserializer)?;
        let mut counts = [0usize; CLASS_COUNT];
        for (key, count) in map {
            let label = EmotionLabel::from_str(&key).map_err(serde::de::Error::custom)?;
            counts[label.index()] = count;
        }
        Ok(ClassHistogram { counts })
    }
}

/// Counts labeled records per class. Every record must carry a label.
pub fn class_histogram(records: &[FeatureRecord]) -> Result<ClassHistogram> {
    let mut hist = ClassHistogram::default();
    for record in records {
        match record.label {
            Some(label) => hist.counts[label.index()] += 1,
            None => {
                return Err(Error::contract(format!(
                    "class_histogram requires labeled records; `{}` has no label",
                    record.id
                )))
            }
        }
    }
    Ok(hist)
}

/// A dataset split: labeled training records, a validation set, and the
/// unlabeled pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub labeled_train: Vec<FeatureRecord>,
    pub validation: Vec<FeatureRecord>,
    pub unlabeled: Vec<FeatureRecord>,
    pub dims: Dims,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn n_labeled(&self) -> usize {
        self.labeled_train.len() + self.validation.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    /// Full invariant check: unique ids, split disjointness, label
    /// presence per split, and per-record dimension/finiteness checks.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for record in self
            .labeled_train
            .iter()
            .chain(&self.validation)
            .chain(&self.unlabeled)
        {
            if !seen.insert(record.id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate sample_id `{}`",
                    record.id
                )));
            }
            record.validate(&self.dims)?;
        }
        for record in self.labeled_train.iter().chain(&self.validation) {
            if record.label.is_none() {
                return Err(Error::validation(format!(
                    "record `{}` in a labeled split has no label",
                    record.id
                )));
            }
        }
        for record in &self.unlabeled {
            if record.label.is_some() {
                return Err(Error::validation(format!(
                    "record `{}` in the unlabeled pool carries a label",
                    record.id
                )));
            }
        }
        Ok(())
    }
}
