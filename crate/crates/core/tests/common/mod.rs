#![allow(dead_code)] // each test binary uses a subset

//! Shared fixtures for the integration suites: a small synthetic dataset
//! and the desk-scale network/train configs the tests drive.

use emorec_core::config::ExperimentConfig;
use emorec_core::data::synthetic::{generate_synthetic, SyntheticOutput, SyntheticSpec};
use emorec_core::data::Dims;
use emorec_core::losses::ContrastiveConfig;
use emorec_core::network::{EncoderBundle, NetworkConfig};
use emorec_core::trainer::TrainConfig;

/// Small, quick-to-train dataset: 176 labeled, 300 unlabeled, tiny dims.
pub fn small_dataset(seed: u64) -> SyntheticOutput {
    let spec = SyntheticSpec {
        class_priors: [40, 38, 30, 28, 24, 16],
        unlabeled_count: 300,
        means_scale: 1.0,
        noise_scale: 1.0,
        cross_modal_coupling: 0.7,
        dims: Dims::new(12, 16, 20),
        seed,
    };
    generate_synthetic(&spec).expect("synthetic generation")
}

pub fn small_network(dims: Dims, init_seed: u64) -> NetworkConfig {
    NetworkConfig {
        d_in: dims,
        d_spec: 16,
        n_spec_layers: 1,
        d_inv: 8,
        n_classes: 6,
        dropout: 0.1,
        init_seed,
    }
}

pub fn small_bundle(dims: Dims, init_seed: u64) -> EncoderBundle {
    EncoderBundle::init(small_network(dims, init_seed)).expect("bundle init")
}

/// Train config scaled to the small dataset: faster learning rates, more
/// epochs relative to the tiny batch count, and oversample targets sized
/// for ~30-record classes.
pub fn quick_train_config(seed: u64) -> TrainConfig {
    use emorec_core::data::EmotionLabel;
    let minority = [EmotionLabel::Sad, EmotionLabel::Worried, EmotionLabel::Surprise];
    TrainConfig {
        lr_step1: 1e-3,
        lr_step2: 5e-4,
        batch_size: 32,
        max_pretrain_epochs: 6,
        patience: 2,
        step_epochs: 25,
        oversample_step1: minority.iter().map(|&c| (c, 30)).collect(),
        oversample_step2: minority.iter().map(|&c| (c, 40)).collect(),
        seed,
        ..TrainConfig::default()
    }
}

pub fn default_loss() -> ContrastiveConfig {
    ContrastiveConfig::default()
}

/// The acceptance-scale experiment config: full 5030-class profile over
/// reduced dims with 10k unlabeled records, shortened epochs.
pub fn acceptance_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = seed;
    cfg.train.max_pretrain_epochs = 10;
    cfg.train.patience = 3;
    cfg.train.step_epochs = 10;
    cfg
}
