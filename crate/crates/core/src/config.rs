//! Experiment configuration: one TOML file with nested sections, unknown
//! keys rejected, every value overridable from the environment
//! (`EMOREC__SECTION__KEY=value`), and a content hash for the run
//! manifest.
//!
//! The root `seed` is the only seed a user sets; every stage derives its
//! own stream from it, so re-running a single stage reproduces the
//! full-pipeline behaviour.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dims, EmotionLabel};
use crate::data::synthetic::SyntheticSpec;
use crate::ensemble::{Head, VotingConfig};
use crate::error::{Error, Result};
use crate::losses::ContrastiveConfig;
use crate::network::baseline::BaselineConfig;
use crate::network::NetworkConfig;
use crate::noise::{build_schedule, NoiseSchedule};
use crate::seeds::{derive_seed, sha256_hex};
use crate::selftrain::ThresholdPolicy;
use crate::trainer::TrainConfig;

pub const ENV_PREFIX: &str = "EMOREC__";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Store,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: DataSource,
    /// Store directory; required when `source = "store"`.
    pub path: Option<String>,
    pub priors: [usize; 6],
    pub unlabeled: usize,
    pub means_scale: f64,
    pub noise_scale: f64,
    pub coupling: f64,
    pub dims: Dims,
}

impl Default for DataSection {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        DataSection {
            source: DataSource::Synthetic,
            path: None,
            priors: spec.class_priors,
            unlabeled: spec.unlabeled_count,
            means_scale: spec.means_scale,
            noise_scale: spec.noise_scale,
            coupling: spec.cross_modal_coupling,
            dims: spec.dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeeSection {
    pub enabled: bool,
    #[serde(rename = "T", alias = "t")]
    pub t: usize,
    pub beta1: f64,
    #[serde(rename = "betaT", alias = "betat")]
    pub beta_t: f64,
}

impl Default for NeeSection {
    fn default() -> Self {
        NeeSection {
            enabled: true,
            t: 100,
            beta1: 0.001,
            beta_t: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub d_spec: usize,
    pub n_spec_layers: usize,
    pub d_inv: usize,
    pub dropout: f64,
    pub baseline_hidden: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        // Desk-scale widths; NetworkConfig::default holds the full-scale
        // reference values.
        NetworkSection {
            d_spec: 64,
            n_spec_layers: 2,
            d_inv: 32,
            dropout: 0.1,
            baseline_hidden: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub tau_intra: f64,
    pub tau_intra_v: Option<f64>,
    pub tau_intra_a: Option<f64>,
    pub tau_intra_t: Option<f64>,
    pub tau_pair: f64,
    pub tau_combo: f64,
    pub normalize: bool,
    pub lambda_intra: f64,
    pub lambda_imc: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            tau_intra: 0.07,
            tau_intra_v: None,
            tau_intra_a: None,
            tau_intra_t: None,
            tau_pair: 0.07,
            tau_combo: 0.07,
            normalize: true,
            lambda_intra: 1.0,
            lambda_imc: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr_step1: f64,
    pub lr_step2: f64,
    pub batch_size: usize,
    pub max_pretrain_epochs: usize,
    pub patience: usize,
    pub step_epochs: usize,
    pub contrastive_in_supervised: bool,
    pub oversample_step1: BTreeMap<EmotionLabel, usize>,
    pub oversample_step2: BTreeMap<EmotionLabel, usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let defaults = TrainConfig::default();
        TrainSection {
            lr_step1: defaults.lr_step1,
            lr_step2: defaults.lr_step2,
            batch_size: defaults.batch_size,
            max_pretrain_epochs: defaults.max_pretrain_epochs,
            patience: defaults.patience,
            step_epochs: defaults.step_epochs,
            contrastive_in_supervised: defaults.contrastive_in_supervised,
            oversample_step1: defaults.oversample_step1,
            oversample_step2: defaults.oversample_step2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftrainSection {
    pub thresholds: BTreeMap<EmotionLabel, f64>,
}

impl Default for SelftrainSection {
    fn default() -> Self {
        SelftrainSection {
            thresholds: ThresholdPolicy::default().thresholds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VotingSection {
    pub weights: BTreeMap<Head, f64>,
}

impl Default for VotingSection {
    fn default() -> Self {
        VotingSection {
            weights: VotingConfig::default().weights,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Default feature-store directory for stage commands.
    pub data: Option<String>,
    /// Default run directory.
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSection,
    pub nee: NeeSection,
    pub network: NetworkSection,
    pub loss: LossSection,
    pub train: TrainSection,
    pub selftrain: SelftrainSection,
    pub voting: VotingSection,
    pub paths: PathsSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(body: &str) -> Result<Self> {
        let table: toml::Table = body
            .parse()
            .map_err(|e| Error::config(format!("malformed config: {e}")))?;
        let mut value = toml::Value::Table(table);
        apply_env_overrides(&mut value, std::env::vars())?;
        value
            .try_into()
            .map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&body)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("serializing config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    /// Hash of the canonical TOML serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml_string()?.as_bytes()))
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        if self.data.source != DataSource::Synthetic {
            return Err(Error::config(
                "data.source is not `synthetic`; no synthetic spec available",
            ));
        }
        Ok(SyntheticSpec {
            class_priors: self.data.priors,
            unlabeled_count: self.data.unlabeled,
            means_scale: self.data.means_scale,
            noise_scale: self.data.noise_scale,
            cross_modal_coupling: self.data.coupling,
            dims: self.data.dims,
            seed: derive_seed(self.seed, "synth"),
        })
    }

    pub fn network_config(&self, dims: Dims) -> NetworkConfig {
        NetworkConfig {
            d_in: dims,
            d_spec: self.network.d_spec,
            n_spec_layers: self.network.n_spec_layers,
            d_inv: self.network.d_inv,
            n_classes: crate::data::CLASS_COUNT,
            dropout: self.network.dropout,
            init_seed: derive_seed(self.seed, "init-main"),
        }
    }

    pub fn baseline_config(&self, dims: Dims) -> BaselineConfig {
        BaselineConfig {
            d_in: dims,
            hidden: self.network.baseline_hidden,
            init_seed: derive_seed(self.seed, "init-baseline"),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr_step1: self.train.lr_step1,
            lr_step2: self.train.lr_step2,
            batch_size: self.train.batch_size,
            max_pretrain_epochs: self.train.max_pretrain_epochs,
            patience: self.train.patience,
            step_epochs: self.train.step_epochs,
            oversample_step1: self.train.oversample_step1.clone(),
            oversample_step2: self.train.oversample_step2.clone(),
            contrastive_in_supervised: self.train.contrastive_in_supervised,
            seed: derive_seed(self.seed, "train"),
        }
    }

    pub fn contrastive_config(&self) -> ContrastiveConfig {
        let base = self.loss.tau_intra;
        ContrastiveConfig {
            tau_intra: [
                self.loss.tau_intra_v.unwrap_or(base),
                self.loss.tau_intra_a.unwrap_or(base),
                self.loss.tau_intra_t.unwrap_or(base),
            ],
            tau_pair: self.loss.tau_pair,
            tau_combo: self.loss.tau_combo,
            normalize: self.loss.normalize,
            lambda_intra: self.loss.lambda_intra,
            lambda_imc: self.loss.lambda_imc,
        }
    }

    /// The configured noise schedule, or None when disabled.
    pub fn noise_schedule(&self) -> Result<Option<NoiseSchedule>> {
        if !self.nee.enabled {
            return Ok(None);
        }
        Ok(Some(build_schedule(self.nee.t, self.nee.beta1, self.nee.beta_t)?))
    }

    pub fn threshold_policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            thresholds: self.selftrain.thresholds.clone(),
        }
    }

    pub fn voting_config(&self) -> VotingConfig {
        VotingConfig {
            weights: self.voting.weights.clone(),
        }
    }
}

/// Applies `EMOREC__SECTION__KEY=value` overrides onto a parsed TOML tree.
/// Key segments match existing keys case-insensitively; values parse as
/// TOML literals and fall back to strings.
fn apply_env_overrides(
    value: &mut toml::Value,
    vars: impl Iterator<Item = (String, String)>,
) -> Result<()> {
    for (key, raw) in vars {
        let Some(path) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        if path.is_empty() {
            continue;
        }
        let segments: Vec<&str> = path.split("__").collect();
        let mut cursor = &mut *value;
        for (i, segment) in segments.iter().enumerate() {
            let table = cursor.as_table_mut().ok_or_else(|| {
                Error::config(format!("env override {key}: `{segment}` is not a table"))
            })?;
            let existing = table
                .keys()
                .find(|k| k.eq_ignore_ascii_case(segment))
                .cloned()
                .unwrap_or_else(|| segment.to_ascii_lowercase());
            if i + 1 == segments.len() {
                table.insert(existing, parse_env_value(&raw));
                break;
            }
            cursor = table
                .entry(existing)
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
    }
    Ok(())
}

fn parse_env_value(raw: &str) -> toml::Value {
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = raw.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(raw.to_string())
}
