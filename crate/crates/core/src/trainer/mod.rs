//! Training stages: contrastive pretraining on the unlabeled pool,
//! supervised step one on oversampled gold labels, and supervised step two
//! with pseudo-labels appended and the learning rate reduced.
//!
//! All shuffling, dropout, and noise draws derive from the run seed, so a
//! repeated run is bit-identical. The bundle is owned exclusively by one
//! training run; parameter updates are strictly serialized.

pub mod optim;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::balance::{oversample, OversampleConfig};
use crate::data::{EmotionLabel, FeatureRecord, Modality};
use crate::ensemble::VotingConfig;
use crate::error::{Error, Result};
use crate::losses::{
    classification_loss_node, inter_modality_loss_node, intra_modality_loss_node,
    pretrain_loss_node, ContrastiveConfig, PairNodes,
};
use crate::network::baseline::{BaselineConfig, BaselineModel};
use crate::network::tape::Tape;
use crate::network::{BatchInput, EncoderBundle, Mode};
use crate::noise::{noise_embed, NoiseSchedule};
use crate::predict::{baseline_validation_waf, validation_waf};
use crate::seeds::{derive_seed, derive_seed_n, rng_from};
use optim::Adam;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_step1: f64,
    pub lr_step2: f64,
    /// Desk-scale default 64; the full-scale reference value is 512.
    pub batch_size: usize,
    pub max_pretrain_epochs: usize,
    pub patience: usize,
    /// Epochs per supervised step.
    pub step_epochs: usize,
    pub oversample_step1: BTreeMap<EmotionLabel, usize>,
    pub oversample_step2: BTreeMap<EmotionLabel, usize>,
    /// Keep contrastive terms active during supervised steps (off by
    /// default).
    pub contrastive_in_supervised: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let minority = [EmotionLabel::Sad, EmotionLabel::Worried, EmotionLabel::Surprise];
        TrainConfig {
            lr_step1: 1e-4,
            lr_step2: 5e-5,
            batch_size: 64,
            max_pretrain_epochs: 40,
            patience: 5,
            step_epochs: 20,
            oversample_step1: minority.iter().map(|&c| (c, 850)).collect(),
            oversample_step2: minority.iter().map(|&c| (c, 1000)).collect(),
            contrastive_in_supervised: false,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_step1 <= 0.0 || self.lr_step2 <= 0.0 {
            return Err(Error::config("learning rates must be positive"));
        }
        if self.lr_step2 > self.lr_step1 {
            return Err(Error::config("lr_step2 must not exceed lr_step1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch_size must be at least 2"));
        }
        if self.max_pretrain_epochs == 0 || self.step_epochs == 0 {
            return Err(Error::config("epoch counts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Pretraining: loss on a held-out unlabeled slice (lower is better).
    HeldOutLoss,
    /// Supervised stages: soft-vote validation WAF (higher is better).
    ValidationWaf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_metric: Vec<f64>,
    pub metric: MetricKind,
    pub lr_per_epoch: Vec<f64>,
    pub best_epoch: usize,
    pub best_value: f64,
    pub stop_reason: StopReason,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
}

impl Stage {
    fn tag(self) -> &'static str {
        match self {
            Stage::One => "stage1",
            Stage::Two => "stage2",
        }
    }
}

/// Per-record f64 feature vectors, cached once per run.
fn to_f64_features(records: &[FeatureRecord]) -> Vec<[Vec<f64>; 3]> {
    records
        .iter()
        .map(|r| {
            [
                r.visual.iter().map(|&x| x as f64).collect(),
                r.acoustic.iter().map(|&x| x as f64).collect(),
                r.text.iter().map(|&x| x as f64).collect(),
            ]
        })
        .collect()
}

fn matrix_from(feats: &[[Vec<f64>; 3]], indices: &[usize], m: usize) -> Array2<f64> {
    let cols = feats[indices[0]][m].len();
    Array2::from_shape_fn((indices.len(), cols), |(r, c)| feats[indices[r]][m][c])
}

/// Noised views for a batch; one derived seed per (record, modality).
fn noised_matrix_from(
    feats: &[[Vec<f64>; 3]],
    indices: &[usize],
    m: Modality,
    schedule: &NoiseSchedule,
    seed: u64,
    epoch_tag: u64,
) -> Result<Array2<f64>> {
    let mi = m.index();
    let cols = feats[indices[0]][mi].len();
    let mut out = Array2::zeros((indices.len(), cols));
    for (r, &gi) in indices.iter().enumerate() {
        let record_seed =
            derive_seed_n(seed, "nee", epoch_tag * feats.len() as u64 + gi as u64).wrapping_add(mi as u64);
        let noised = noise_embed(m, &feats[gi][mi], schedule, record_seed)?;
        for (c, &v) in noised.vector.iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

fn batch_input(
    feats: &[[Vec<f64>; 3]],
    indices: &[usize],
    schedule: Option<&NoiseSchedule>,
    seed: u64,
    epoch_tag: u64,
) -> Result<BatchInput> {
    let features = [
        matrix_from(feats, indices, 0),
        matrix_from(feats, indices, 1),
        matrix_from(feats, indices, 2),
    ];
    let noised = match schedule {
        Some(schedule) => Some([
            noised_matrix_from(feats, indices, Modality::Visual, schedule, seed, epoch_tag)?,
            noised_matrix_from(feats, indices, Modality::Acoustic, schedule, seed, epoch_tag)?,
            noised_matrix_from(feats, indices, Modality::Text, schedule, seed, epoch_tag)?,
        ]),
        None => None,
    };
    Ok(BatchInput { features, noised })
}

/// Eval-mode pretraining loss for one batch.
fn pretrain_batch_loss(
    bundle: &EncoderBundle,
    input: &BatchInput,
    loss_cfg: &ContrastiveConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let params = bundle.params.insert_into(&mut tape, false);
    let nodes = bundle.forward_batch(&mut tape, &params, input, Mode::Eval, None)?;
    let intra = match nodes.spec_noised {
        Some(noised) => Some(intra_modality_loss_node(&mut tape, nodes.spec, noised, loss_cfg)?),
        None => None,
    };
    let pair = PairNodes {
        at: nodes.pair_at,
        vt: nodes.pair_vt,
        av: nodes.pair_av,
    };
    let imc = inter_modality_loss_node(&mut tape, nodes.inv, &pair, loss_cfg)?;
    let loss = pretrain_loss_node(&mut tape, intra, imc, loss_cfg)?;
    Ok(tape.scalar(loss))
}

/// Contrastive pretraining over the unlabeled pool with early stopping on
/// a held-out slice. With `schedule = None` (noise augmentation disabled)
/// only the inter-modality term is minimized.
pub fn pretrain(
    bundle: &mut EncoderBundle,
    pool: &[FeatureRecord],
    schedule: Option<&NoiseSchedule>,
    loss_cfg: &ContrastiveConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::config("pretrain: unlabeled pool is empty"));
    }
    if pool.len() < 4 {
        return Err(Error::config(
            "pretrain: unlabeled pool must hold at least 4 records (contrastive batches need 2, plus a held-out slice)",
        ));
    }

    let feats = to_f64_features(pool);
    let n = pool.len();

    // Held-out early-stop slice: ~5%, at least 2, leaving at least 2.
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = rng_from(derive_seed(cfg.seed, "pretrain-held"));
        order.shuffle(&mut rng);
    }
    let held_n = (n / 20).clamp(2, n - 2);
    let held: Vec<usize> = order[..held_n].to_vec();
    let train: Vec<usize> = order[held_n..].to_vec();

    let mut adam = Adam::new(&bundle.params);
    let mut train_losses = Vec::new();
    let mut held_losses = Vec::new();
    let mut best_value = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = bundle.params.clone();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_pretrain_epochs {
        let mut shuffled = train.clone();
        {
            use rand::seq::SliceRandom;
            let mut rng = rng_from(derive_seed_n(cfg.seed, "pretrain-shuffle", epoch as u64));
            shuffled.shuffle(&mut rng);
        }
        let mut dropout_rng = rng_from(derive_seed_n(cfg.seed, "pretrain-dropout", epoch as u64));

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in shuffled.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let input = batch_input(&feats, batch, schedule, cfg.seed, 1 + epoch as u64)?;
            let mut tape = Tape::new();
            let params = bundle.params.insert_into(&mut tape, true);
            let nodes =
                bundle.forward_batch(&mut tape, &params, &input, Mode::Train, Some(&mut dropout_rng))?;
            let intra = match nodes.spec_noised {
                Some(noised) => {
                    Some(intra_modality_loss_node(&mut tape, nodes.spec, noised, loss_cfg)?)
                }
                None => None,
            };
            let pair = PairNodes {
                at: nodes.pair_at,
                vt: nodes.pair_vt,
                av: nodes.pair_av,
            };
            let imc = inter_modality_loss_node(&mut tape, nodes.inv, &pair, loss_cfg)?;
            let loss = pretrain_loss_node(&mut tape, intra, imc, loss_cfg)?;
            epoch_loss += tape.scalar(loss) * batch.len() as f64;
            seen += batch.len();

            let grads = tape.backward(loss);
            let bundle_grads: Vec<Option<Array2<f64>>> =
                params.ids.iter().map(|&id| grads[id].clone()).collect();
            adam.step(&mut bundle.params, &bundle_grads, cfg.lr_step1);
        }
        train_losses.push(if seen > 0 { epoch_loss / seen as f64 } else { f64::NAN });

        let held_loss = pretrain_eval_loss(bundle, &feats, &held, schedule, loss_cfg, cfg)?;
        held_losses.push(held_loss);

        if held_loss < best_value {
            best_value = held_loss;
            best_epoch = epoch;
            best_params = bundle.params.clone();
        } else if epoch - best_epoch > cfg.patience {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    bundle.params = best_params;
    Ok(TrainReport {
        lr_per_epoch: vec![cfg.lr_step1; train_losses.len()],
        train_loss: train_losses,
        val_metric: held_losses,
        metric: MetricKind::HeldOutLoss,
        best_epoch,
        best_value,
        stop_reason,
        checkpoint: None,
    })
}

/// Eval-mode pretraining loss over the held-out slice; noise seeds are
/// fixed per record so the signal is comparable across epochs.
fn pretrain_eval_loss(
    bundle: &EncoderBundle,
    feats: &[[Vec<f64>; 3]],
    held: &[usize],
    schedule: Option<&NoiseSchedule>,
    loss_cfg: &ContrastiveConfig,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut total = 0.0;
    let mut seen = 0usize;
    for batch in held.chunks(cfg.batch_size) {
        if batch.len() < 2 {
            continue;
        }
        let input = batch_input(feats, batch, schedule, cfg.seed, 0)?;
        let value = pretrain_batch_loss(bundle, &input, loss_cfg)?;
        total += value * batch.len() as f64;
        seen += batch.len();
    }
    if seen == 0 {
        return Err(Error::contract("held-out slice produced no evaluable batch".to_string()));
    }
    Ok(total / seen as f64)
}

/// Supervised training of the main model.
///
/// Stage one oversamples gold labels and trains at `lr_step1`; stage two
/// appends pseudo records (never to validation), oversamples to the
/// stage-two targets, and trains at `lr_step2`. Model selection is by
/// soft-vote validation WAF each epoch.
pub fn train_supervised(
    bundle: &mut EncoderBundle,
    labeled_train: &[FeatureRecord],
    validation: &[FeatureRecord],
    stage: Stage,
    pseudo: Option<&[FeatureRecord]>,
    cfg: &TrainConfig,
    voting: &VotingConfig,
    contrastive: Option<(&ContrastiveConfig, Option<&NoiseSchedule>)>,
) -> Result<TrainReport> {
    cfg.validate()?;
    voting.validate()?;
    if labeled_train.is_empty() {
        return Err(Error::config("train_supervised: no labeled records"));
    }
    if validation.is_empty() {
        return Err(Error::config("train_supervised: empty validation set"));
    }
    match (stage, pseudo) {
        (Stage::One, Some(_)) => {
            return Err(Error::contract(
                "stage one takes no pseudo records".to_string(),
            ))
        }
        (Stage::Two, None) => {
            return Err(Error::contract(
                "stage two requires a pseudo record list (possibly empty)".to_string(),
            ))
        }
        _ => {}
    }

    let validation_ids: HashSet<&str> = validation.iter().map(|r| r.id.as_str()).collect();
    let mut training: Vec<FeatureRecord> = labeled_train.to_vec();
    if let Some(pseudo) = pseudo {
        for record in pseudo {
            if validation_ids.contains(record.id.as_str()) {
                return Err(Error::contract(format!(
                    "pseudo record `{}` appears in the validation set",
                    record.id
                )));
            }
        }
        training.extend(pseudo.iter().cloned());
    }

    let (lr, targets) = match stage {
        Stage::One => (cfg.lr_step1, &cfg.oversample_step1),
        Stage::Two => (cfg.lr_step2, &cfg.oversample_step2),
    };
    let oversample_cfg = OversampleConfig::new(
        targets.clone(),
        derive_seed(cfg.seed, &format!("{}-oversample", stage.tag())),
    );
    let training = oversample(&training, &oversample_cfg)?;
    let labels: Vec<EmotionLabel> = training
        .iter()
        .map(|r| r.label.expect("oversample enforces labels"))
        .collect();
    let feats = to_f64_features(&training);
    let val_refs: Vec<&FeatureRecord> = validation.iter().collect();

    let schedule = contrastive.and_then(|(_, s)| s);
    let loss_cfg = contrastive.map(|(c, _)| c);

    let mut adam = Adam::new(&bundle.params);
    let mut train_losses = Vec::new();
    let mut val_wafs = Vec::new();
    let mut best_value = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = bundle.params.clone();

    for epoch in 0..cfg.step_epochs {
        let mut order: Vec<usize> = (0..training.len()).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = rng_from(derive_seed_n(
                cfg.seed,
                &format!("{}-shuffle", stage.tag()),
                epoch as u64,
            ));
            order.shuffle(&mut rng);
        }
        let mut dropout_rng = rng_from(derive_seed_n(
            cfg.seed,
            &format!("{}-dropout", stage.tag()),
            epoch as u64,
        ));

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            // Contrastive terms need at least two samples.
            if batch.is_empty() || (loss_cfg.is_some() && batch.len() < 2) {
                continue;
            }
            let input = batch_input(
                &feats,
                batch,
                if loss_cfg.is_some() { schedule } else { None },
                cfg.seed,
                1 + epoch as u64,
            )?;
            let batch_labels: Vec<EmotionLabel> = batch.iter().map(|&i| labels[i]).collect();

            let mut tape = Tape::new();
            let params = bundle.params.insert_into(&mut tape, true);
            let nodes =
                bundle.forward_batch(&mut tape, &params, &input, Mode::Train, Some(&mut dropout_rng))?;
            let cls = classification_loss_node(&mut tape, nodes.logits, &batch_labels)?;
            let loss = match loss_cfg {
                Some(loss_cfg) => {
                    let intra = match nodes.spec_noised {
                        Some(noised) => Some(intra_modality_loss_node(
                            &mut tape, nodes.spec, noised, loss_cfg,
                        )?),
                        None => None,
                    };
                    let pair = PairNodes {
                        at: nodes.pair_at,
                        vt: nodes.pair_vt,
                        av: nodes.pair_av,
                    };
                    let imc = inter_modality_loss_node(&mut tape, nodes.inv, &pair, loss_cfg)?;
                    let contrast = pretrain_loss_node(&mut tape, intra, imc, loss_cfg)?;
                    tape.add_scaled(&[(cls, 1.0), (contrast, 1.0)])
                }
                None => cls,
            };
            epoch_loss += tape.scalar(loss) * batch.len() as f64;
            seen += batch.len();

            let grads = tape.backward(loss);
            let bundle_grads: Vec<Option<Array2<f64>>> =
                params.ids.iter().map(|&id| grads[id].clone()).collect();
            adam.step(&mut bundle.params, &bundle_grads, lr);
        }
        train_losses.push(if seen > 0 { epoch_loss / seen as f64 } else { f64::NAN });

        let waf = validation_waf(bundle, voting, &val_refs)?;
        val_wafs.push(waf);
        // Ties keep the later epoch: confidence keeps sharpening while
        // validation WAF is saturated, which the pseudo-label thresholds
        // rely on.
        if waf >= best_value {
            best_value = waf;
            best_epoch = epoch;
            best_params = bundle.params.clone();
        }
    }

    bundle.params = best_params;
    Ok(TrainReport {
        lr_per_epoch: vec![lr; train_losses.len()],
        train_loss: train_losses,
        val_metric: val_wafs,
        metric: MetricKind::ValidationWaf,
        best_epoch,
        best_value,
        stop_reason: StopReason::MaxEpochs,
        checkpoint: None,
    })
}

/// Trains the stand-in baseline: one fused feed-forward classifier on the
/// same oversampled stage-one data, no contrastive pretraining, no noise
/// augmentation.
pub fn train_baseline(
    labeled_train: &[FeatureRecord],
    validation: &[FeatureRecord],
    bcfg: &BaselineConfig,
    cfg: &TrainConfig,
) -> Result<(BaselineModel, TrainReport)> {
    cfg.validate()?;
    if labeled_train.is_empty() {
        return Err(Error::config("train_baseline: no labeled records"));
    }
    if validation.is_empty() {
        return Err(Error::config("train_baseline: empty validation set"));
    }

    let oversample_cfg = OversampleConfig::new(
        cfg.oversample_step1.clone(),
        derive_seed(cfg.seed, "baseline-oversample"),
    );
    let training = oversample(labeled_train, &oversample_cfg)?;
    let labels: Vec<EmotionLabel> = training
        .iter()
        .map(|r| r.label.expect("oversample enforces labels"))
        .collect();
    let val_refs: Vec<&FeatureRecord> = validation.iter().collect();

    let mut model = BaselineModel::init(*bcfg)?;
    let mut adam = Adam::new(&model.params);
    let training_refs: Vec<&FeatureRecord> = training.iter().collect();
    let fused = BaselineModel::fused_matrix(&training_refs);

    let mut train_losses = Vec::new();
    let mut val_wafs = Vec::new();
    let mut best_value = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = model.params.clone();

    for epoch in 0..cfg.step_epochs {
        let mut order: Vec<usize> = (0..training.len()).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = rng_from(derive_seed_n(cfg.seed, "baseline-shuffle", epoch as u64));
            order.shuffle(&mut rng);
        }

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let x = Array2::from_shape_fn((batch.len(), fused.ncols()), |(r, c)| {
                fused[(batch[r], c)]
            });
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i].index()).collect();
            let mut tape = Tape::new();
            let params = model.params.insert_into(&mut tape, true);
            let x = tape.leaf(x, false);
            let logits = model.forward_batch(&mut tape, &params, x);
            let loss = tape.cross_entropy_mean(logits, &batch_labels);
            epoch_loss += tape.scalar(loss) * batch.len() as f64;
            seen += batch.len();

            let grads = tape.backward(loss);
            let model_grads: Vec<Option<Array2<f64>>> =
                params.ids.iter().map(|&id| grads[id].clone()).collect();
            adam.step(&mut model.params, &model_grads, cfg.lr_step1);
        }
        train_losses.push(epoch_loss / seen as f64);

        let waf = baseline_validation_waf(&model, &val_refs)?;
        val_wafs.push(waf);
        if waf >= best_value {
            best_value = waf;
            best_epoch = epoch;
            best_params = model.params.clone();
        }
    }

    model.params = best_params;
    let report = TrainReport {
        lr_per_epoch: vec![cfg.lr_step1; train_losses.len()],
        train_loss: train_losses,
        val_metric: val_wafs,
        metric: MetricKind::ValidationWaf,
        best_epoch,
        best_value,
        stop_reason: StopReason::MaxEpochs,
        checkpoint: None,
    };
    Ok((model, report))
}
