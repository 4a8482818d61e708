//! Feature store layout: `manifest.json` plus one JSONL file per split.
//!
//! Each record line is
//! `{"id", "v": [...], "a": [...], "t": [...], "label": str|null, "origin": "gold"|"pseudo"|"duplicate"}`.
//! Vectors are 32-bit floats; serde_json prints the shortest representation
//! that round-trips, so save/load is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, Dims, EmotionLabel, FeatureRecord, Origin};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELED_FILE: &str = "labeled.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const UNLABELED_FILE: &str = "unlabeled.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub labeled: usize,
    pub validation: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreManifest {
    pub dims: Dims,
    pub label_order: Vec<String>,
    pub counts: SplitCounts,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    v: Vec<f32>,
    a: Vec<f32>,
    t: Vec<f32>,
    label: Option<String>,
    origin: Origin,
}

impl RecordLine {
    fn from_record(record: &FeatureRecord) -> Self {
        RecordLine {
            id: record.id.clone(),
            v: record.visual.clone(),
            a: record.acoustic.clone(),
            t: record.text.clone(),
            label: record.label.map(|l| l.as_str().to_string()),
            origin: record.origin,
        }
    }

    fn into_record(self) -> Result<FeatureRecord> {
        let label = match self.label {
            Some(s) => Some(EmotionLabel::from_str(&s)?),
            None => None,
        };
        Ok(FeatureRecord {
            id: self.id,
            visual: self.v,
            acoustic: self.a,
            text: self.t,
            label,
            origin: self.origin,
        })
    }
}

fn write_jsonl(path: &Path, records: &[FeatureRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(&RecordLine::from_record(record))
            .map_err(|e| Error::format(format!("serializing record `{}`: {e}", record.id)))?;
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_jsonl(path: &Path) -> Result<Vec<FeatureRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| {
            Error::format(format!("{}:{}: malformed record: {e}", path.display(), lineno + 1))
        })?;
        records.push(parsed.into_record()?);
    }
    Ok(records)
}

/// Writes a split to `dir` in the documented store layout.
pub fn save_feature_store(split: &DatasetSplit, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = StoreManifest {
        dims: split.dims,
        label_order: EmotionLabel::ALL.iter().map(|l| l.as_str().to_string()).collect(),
        counts: SplitCounts {
            labeled: split.labeled_train.len(),
            validation: split.validation.len(),
            unlabeled: split.unlabeled.len(),
        },
        seed: split.seed,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(format!("serializing manifest: {e}")))?;
    std::fs::write(&manifest_path, body).map_err(|e| Error::io(&manifest_path, e))?;
    write_jsonl(&dir.join(LABELED_FILE), &split.labeled_train)?;
    write_jsonl(&dir.join(VALIDATION_FILE), &split.validation)?;
    write_jsonl(&dir.join(UNLABELED_FILE), &split.unlabeled)?;
    Ok(())
}

/// Loads and validates a feature store.
///
/// Errors: missing or malformed manifest is a format error; a dimension
/// mismatch or duplicate sample id is a validation error naming the record.
pub fn load_feature_store(dir: &Path) -> Result<DatasetSplit> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::format(format!(
            "missing manifest: {}",
            manifest_path.display()
        )));
    }
    let body = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: StoreManifest = serde_json::from_str(&body)
        .map_err(|e| Error::format(format!("malformed manifest: {e}")))?;

    let expected_order: Vec<String> = EmotionLabel::ALL.iter().map(|l| l.as_str().to_string()).collect();
    if manifest.label_order != expected_order {
        return Err(Error::format(format!(
            "manifest label_order {:?} does not match the fixed class order {:?}",
            manifest.label_order, expected_order
        )));
    }

    let split = DatasetSplit {
        labeled_train: read_jsonl(&dir.join(LABELED_FILE))?,
        validation: read_jsonl(&dir.join(VALIDATION_FILE))?,
        unlabeled: read_jsonl(&dir.join(UNLABELED_FILE))?,
        dims: manifest.dims,
        seed: manifest.seed,
    };

    let actual = SplitCounts {
        labeled: split.labeled_train.len(),
        validation: split.validation.len(),
        unlabeled: split.unlabeled.len(),
    };
    if actual != manifest.counts {
        return Err(Error::validation(format!(
            "manifest counts {:?} do not match store contents {:?}",
            manifest.counts, actual
        )));
    }

    split.validate()?;
    Ok(split)
}

/// Audit sidecar written by the synthetic generator: the hidden gold labels
/// of the unlabeled pool, used only to score pseudo-label accuracy.
pub const HIDDEN_GOLD_FILE: &str = "unlabeled_gold.json";

pub fn save_hidden_gold(dir: &Path, gold: &std::collections::BTreeMap<String, EmotionLabel>) -> Result<()> {
    let path = dir.join(HIDDEN_GOLD_FILE);
    let body = serde_json::to_string_pretty(gold)
        .map_err(|e| Error::format(format!("serializing hidden gold labels: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

pub fn load_hidden_gold(dir: &Path) -> Result<std::collections::BTreeMap<String, EmotionLabel>> {
    let path = dir.join(HIDDEN_GOLD_FILE);
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::format(format!("malformed hidden gold file: {e}")))
}
