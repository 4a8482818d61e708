//! Semi-supervised trimodal emotion recognition over precomputed
//! per-utterance feature vectors.
//!
//! The pipeline: rebalance labeled data by random oversampling, pretrain
//! modality-specific and modality-invariant encoders with combinatorial
//! contrastive learning (clean vs noise-augmented views within a modality,
//! all single/pair combinations across modalities), self-train with
//! pseudo-labels accepted by two-model intersection under class-wise
//! confidence thresholds, and predict by weighted soft voting over four
//! classifier heads. Evaluation is the support-weighted average F-score.

pub mod balance;
pub mod config;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod network;
pub mod pipeline;
pub mod plot;
pub mod predict;
pub mod seeds;
pub mod selftrain;
pub mod trainer;

pub use error::{Error, Result};
