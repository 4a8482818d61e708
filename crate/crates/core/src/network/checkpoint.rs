//! Checkpoint layout: a directory with `config.json`, one little-endian
//! f64 binary file per named parameter, and `manifest.json` listing names,
//! shapes, and content hashes.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::baseline::{BaselineConfig, BaselineModel};
use crate::network::{EncoderBundle, NetworkConfig, ParamSet};
use crate::seeds::sha256_hex;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CheckpointConfig {
    EncoderBundle { config: NetworkConfig },
    Baseline { config: BaselineConfig },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointManifest {
    params: Vec<TensorEntry>,
    /// Hash over the per-tensor hashes, in order.
    content_hash: String,
}

fn tensor_bytes(value: &Array2<f64>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(value.len() * 8);
    for &v in value.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn tensor_from_bytes(bytes: &[u8], rows: usize, cols: usize, name: &str) -> Result<Array2<f64>> {
    if bytes.len() != rows * cols * 8 {
        return Err(Error::format(format!(
            "tensor `{name}`: expected {} bytes, found {}",
            rows * cols * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::format(format!("tensor `{name}`: {e}")))
}

fn save_params(params: &ParamSet, dir: &Path) -> Result<String> {
    let mut entries = Vec::with_capacity(params.len());
    let mut combined = String::new();
    for i in 0..params.len() {
        let name = params.name(i).to_string();
        let value = params.value(i);
        let bytes = tensor_bytes(value);
        let hash = sha256_hex(&bytes);
        let path = dir.join(format!("{name}.bin"));
        std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        combined.push_str(&hash);
        let (rows, cols) = value.dim();
        entries.push(TensorEntry { name, rows, cols, sha256: hash });
    }
    let content_hash = sha256_hex(combined.as_bytes());
    let manifest = CheckpointManifest {
        params: entries,
        content_hash: content_hash.clone(),
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(format!("serializing checkpoint manifest: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(content_hash)
}

fn load_params(dir: &Path) -> Result<ParamSet> {
    let path = dir.join("manifest.json");
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&body)
        .map_err(|e| Error::format(format!("malformed checkpoint manifest: {e}")))?;
    let mut params = ParamSet::new();
    let mut combined = String::new();
    for entry in &manifest.params {
        let path = dir.join(format!("{}.bin", entry.name));
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let hash = sha256_hex(&bytes);
        if hash != entry.sha256 {
            return Err(Error::validation(format!(
                "tensor `{}` content hash mismatch",
                entry.name
            )));
        }
        combined.push_str(&hash);
        params.push(entry.name.clone(), tensor_from_bytes(&bytes, entry.rows, entry.cols, &entry.name)?);
    }
    if sha256_hex(combined.as_bytes()) != manifest.content_hash {
        return Err(Error::validation("checkpoint content hash mismatch".to_string()));
    }
    Ok(params)
}

fn write_config(dir: &Path, cfg: &CheckpointConfig) -> Result<()> {
    let path = dir.join("config.json");
    let body = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::format(format!("serializing checkpoint config: {e}")))?;
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn read_config(dir: &Path) -> Result<CheckpointConfig> {
    let path = dir.join("config.json");
    if !path.exists() {
        return Err(Error::format(format!(
            "missing checkpoint config: {}",
            path.display()
        )));
    }
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::format(format!("malformed checkpoint config: {e}")))
}

/// Saves a main-model checkpoint; returns its content hash.
pub fn save_bundle(bundle: &EncoderBundle, dir: &Path) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_config(dir, &CheckpointConfig::EncoderBundle { config: bundle.cfg })?;
    save_params(&bundle.params, dir)
}

pub fn load_bundle(dir: &Path) -> Result<EncoderBundle> {
    match read_config(dir)? {
        CheckpointConfig::EncoderBundle { config } => {
            let bundle = EncoderBundle {
                cfg: config,
                params: load_params(dir)?,
            };
            bundle.shape_audit()?;
            Ok(bundle)
        }
        CheckpointConfig::Baseline { .. } => Err(Error::format(format!(
            "{} holds a baseline checkpoint, not an encoder bundle",
            dir.display()
        ))),
    }
}

/// Saves a baseline checkpoint; returns its content hash.
pub fn save_baseline(model: &BaselineModel, dir: &Path) -> Result<String> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_config(dir, &CheckpointConfig::Baseline { config: model.cfg })?;
    save_params(&model.params, dir)
}

pub fn load_baseline(dir: &Path) -> Result<BaselineModel> {
    match read_config(dir)? {
        CheckpointConfig::Baseline { config } => Ok(BaselineModel {
            cfg: config,
            params: load_params(dir)?,
        }),
        CheckpointConfig::EncoderBundle { .. } => Err(Error::format(format!(
            "{} holds an encoder bundle, not a baseline checkpoint",
            dir.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dims;
    use crate::network::NetworkConfig;

    #[test]
    fn bundle_round_trip_is_exact() {
        let cfg = NetworkConfig {
            d_in: Dims::new(5, 4, 6),
            d_spec: 8,
            n_spec_layers: 1,
            d_inv: 4,
            dropout: 0.1,
            init_seed: 3,
            ..NetworkConfig::default()
        };
        let bundle = EncoderBundle::init(cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let hash = save_bundle(&bundle, dir.path()).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        assert_eq!(loaded.cfg, bundle.cfg);
        assert_eq!(loaded.params, bundle.params);
        // Re-saving yields the same content hash.
        let dir2 = tempfile::tempdir().unwrap();
        let hash2 = save_bundle(&loaded, dir2.path()).unwrap();
        assert_eq!(hash, hash2);
    }

    #[test]
    fn corrupted_tensor_is_detected() {
        let cfg = NetworkConfig {
            d_in: Dims::new(3, 3, 3),
            d_spec: 4,
            n_spec_layers: 1,
            d_inv: 2,
            init_seed: 1,
            ..NetworkConfig::default()
        };
        let bundle = EncoderBundle::init(cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let victim = dir.path().join("inv.fc1.w.bin");
        let mut bytes = std::fs::read(&victim).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&victim, bytes).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn kind_mismatch_is_format_error() {
        let baseline = BaselineModel::init(BaselineConfig {
            d_in: Dims::new(3, 3, 3),
            hidden: 4,
            init_seed: 1,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_baseline(&baseline, dir.path()).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Format(_))));
        let loaded = load_baseline(dir.path()).unwrap();
        assert_eq!(loaded.params, baseline.params);
    }
}
