//! Class-conditional synthetic feature generator.
//!
//! Stands in for the real extraction pipeline: per class and per modality a
//! Gaussian cluster, with the three modality means blended from a shared
//! latent class direction (strength `cross_modal_coupling`) so cross-modal
//! alignment is learnable, plus an independent per-class direction.
//! Everything derives from the spec seed, so equal spec means byte-identical
//! output.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, Dims, EmotionLabel, FeatureRecord, Modality, Origin, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from};

/// Width of the latent class space shared across modalities.
const LATENT_DIM: usize = 16;

/// Validation share of the labeled pool (stratified by class).
const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Labeled record count per class, in fixed class order.
    pub class_priors: [usize; CLASS_COUNT],
    /// Size of the separate unlabeled pool, drawn from the same mixture.
    pub unlabeled_count: usize,
    pub means_scale: f64,
    pub noise_scale: f64,
    /// Share of each class mean that comes from the cross-modal latent
    /// direction, in [0, 1].
    pub cross_modal_coupling: f64,
    pub dims: Dims,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        // Class profile mirrors the labeled training distribution this
        // pipeline targets; dims are desk-scale stand-ins.
        SyntheticSpec {
            class_priors: [1248, 1208, 1038, 730, 616, 190],
            unlabeled_count: 10_000,
            means_scale: 1.0,
            noise_scale: 1.0,
            cross_modal_coupling: 0.7,
            dims: Dims::new(64, 96, 128),
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_priors.iter().all(|&c| c == 0) {
            return Err(Error::config("synthetic spec: all class counts are zero"));
        }
        if self.dims.v == 0 || self.dims.a == 0 || self.dims.t == 0 {
            return Err(Error::config("synthetic spec: dims must be positive"));
        }
        if self.means_scale <= 0.0 || self.noise_scale <= 0.0 {
            return Err(Error::config(
                "synthetic spec: means_scale and noise_scale must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.cross_modal_coupling) {
            return Err(Error::config(
                "synthetic spec: cross_modal_coupling must be in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Per-class, per-modality cluster means.
struct ClassMeans {
    /// means[class][modality] is a vector of length dims(modality).
    means: Vec<[Vec<f64>; 3]>,
}

fn gaussian_vec(rng: &mut rand_chacha::ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn build_class_means(spec: &SyntheticSpec) -> ClassMeans {
    // Shared latent class directions and fixed per-modality projections.
    let mut latent_rng = rng_from(derive_seed(spec.seed, "synthetic-latent"));
    let latents: Vec<Vec<f64>> = (0..CLASS_COUNT)
        .map(|_| gaussian_vec(&mut latent_rng, LATENT_DIM))
        .collect();

    let mut proj_rng = rng_from(derive_seed(spec.seed, "synthetic-proj"));
    let scale = (1.0 / LATENT_DIM as f64).sqrt();
    let projections: Vec<Vec<f64>> = Modality::ALL
        .iter()
        .map(|&m| {
            gaussian_vec(&mut proj_rng, LATENT_DIM * spec.dims.get(m))
                .into_iter()
                .map(|x| x * scale)
                .collect()
        })
        .collect();

    let mut dir_rng = rng_from(derive_seed(spec.seed, "synthetic-classdir"));
    let coupling = spec.cross_modal_coupling;
    let independent_weight = (1.0 - coupling * coupling).sqrt();

    let means = (0..CLASS_COUNT)
        .map(|c| {
            let mut per_modality: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for (mi, &m) in Modality::ALL.iter().enumerate() {
                let d = spec.dims.get(m);
                let proj = &projections[mi];
                let independent = gaussian_vec(&mut dir_rng, d);
                let mut mean = vec![0.0; d];
                for (j, slot) in mean.iter_mut().enumerate() {
                    let shared: f64 = (0..LATENT_DIM)
                        .map(|l| proj[l * d + j] * latents[c][l])
                        .sum();
                    *slot = spec.means_scale
                        * (coupling * shared + independent_weight * independent[j]);
                }
                per_modality[mi] = mean;
            }
            per_modality
        })
        .collect();

    ClassMeans { means }
}

fn sample_record(
    id: String,
    class: usize,
    label: Option<EmotionLabel>,
    means: &ClassMeans,
    spec: &SyntheticSpec,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> FeatureRecord {
    let mut vectors: [Vec<f32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (mi, &m) in Modality::ALL.iter().enumerate() {
        let d = spec.dims.get(m);
        let mean = &means.means[class][mi];
        vectors[mi] = (0..d)
            .map(|j| {
                let eps: f64 = rng.sample(StandardNormal);
                (mean[j] + spec.noise_scale * eps) as f32
            })
            .collect();
    }
    let [visual, acoustic, text] = vectors;
    FeatureRecord {
        id,
        visual,
        acoustic,
        text,
        label,
        origin: Origin::Gold,
    }
}

/// Generated split plus the hidden gold labels of the unlabeled pool,
/// retained so pseudo-label accuracy can be audited.
pub struct SyntheticOutput {
    pub split: DatasetSplit,
    pub hidden_gold: BTreeMap<String, EmotionLabel>,
}

/// Generates a synthetic dataset: stratified 80/20 labeled/validation split
/// plus a separate unlabeled pool from the same mixture.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticOutput> {
    spec.validate()?;
    let means = build_class_means(spec);

    // Labeled records, generated grouped by class in fixed order.
    let mut labeled_rng = rng_from(derive_seed(spec.seed, "synthetic-labeled"));
    let mut per_class: Vec<Vec<FeatureRecord>> = Vec::with_capacity(CLASS_COUNT);
    let mut next_id = 0usize;
    for (c, &count) in spec.class_priors.iter().enumerate() {
        let label = EmotionLabel::from_index(c)?;
        let mut class_records = Vec::with_capacity(count);
        for _ in 0..count {
            let id = format!("utt-{next_id:06}");
            next_id += 1;
            class_records.push(sample_record(id, c, Some(label), &means, spec, &mut labeled_rng));
        }
        per_class.push(class_records);
    }

    // Stratified split: per class, shuffle and hold out ~20% for validation.
    use rand::seq::SliceRandom;
    let mut split_rng = rng_from(derive_seed(spec.seed, "synthetic-split"));
    let mut labeled_train = Vec::new();
    let mut validation = Vec::new();
    for class_records in per_class {
        let n = class_records.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut split_rng);
        let n_val = ((n as f64) * VALIDATION_FRACTION).round() as usize;
        let mut to_validation = vec![false; n];
        for &idx in order.iter().take(n_val) {
            to_validation[idx] = true;
        }
        for (idx, record) in class_records.into_iter().enumerate() {
            if to_validation[idx] {
                validation.push(record);
            } else {
                labeled_train.push(record);
            }
        }
    }

    // Unlabeled pool: classes drawn proportionally to the priors; the true
    // class is kept aside for audit only.
    let total_prior: usize = spec.class_priors.iter().sum();
    let mut unlabeled_rng = rng_from(derive_seed(spec.seed, "synthetic-unlabeled"));
    let mut unlabeled = Vec::with_capacity(spec.unlabeled_count);
    let mut hidden_gold = BTreeMap::new();
    for i in 0..spec.unlabeled_count {
        let mut draw = unlabeled_rng.random_range(0..total_prior);
        let mut class = 0usize;
        for (c, &count) in spec.class_priors.iter().enumerate() {
            if draw < count {
                class = c;
                break;
            }
            draw -= count;
        }
        let id = format!("unl-{i:06}");
        let record = sample_record(id.clone(), class, None, &means, spec, &mut unlabeled_rng);
        hidden_gold.insert(id, EmotionLabel::from_index(class)?);
        unlabeled.push(record);
    }

    let split = DatasetSplit {
        labeled_train,
        validation,
        unlabeled,
        dims: spec.dims,
        seed: spec.seed,
    };
    split.validate()?;
    Ok(SyntheticOutput { split, hidden_gold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::class_histogram;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            class_priors: [40, 38, 30, 24, 20, 10],
            unlabeled_count: 25,
            means_scale: 1.0,
            noise_scale: 1.0,
            cross_modal_coupling: 0.7,
            dims: Dims::new(8, 6, 10),
            seed: 3,
        }
    }

    #[test]
    fn per_class_counts_match_priors_exactly() {
        let spec = small_spec();
        let out = generate_synthetic(&spec).unwrap();
        let mut all = out.split.labeled_train.clone();
        all.extend(out.split.validation.clone());
        let hist = class_histogram(&all).unwrap();
        assert_eq!(hist.counts, spec.class_priors);
        assert_eq!(out.split.n_unlabeled(), 25);
        assert_eq!(out.hidden_gold.len(), 25);
    }

    #[test]
    fn default_profile_totals_5030() {
        let spec = SyntheticSpec {
            unlabeled_count: 0,
            dims: Dims::new(4, 4, 4),
            ..SyntheticSpec::default()
        };
        let out = generate_synthetic(&spec).unwrap();
        assert_eq!(out.split.n_labeled(), 5030);
    }

    #[test]
    fn single_record_is_neutral() {
        let spec = SyntheticSpec {
            class_priors: [1, 0, 0, 0, 0, 0],
            unlabeled_count: 0,
            dims: Dims::new(4, 4, 4),
            ..SyntheticSpec::default()
        };
        let out = generate_synthetic(&spec).unwrap();
        assert_eq!(out.split.n_labeled(), 1);
        assert_eq!(out.split.validation.len(), 0);
        assert_eq!(out.split.labeled_train[0].label, Some(EmotionLabel::Neutral));
    }

    #[test]
    fn all_zero_priors_is_config_error() {
        let spec = SyntheticSpec {
            class_priors: [0; 6],
            ..small_spec()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn stratified_validation_fraction_within_band() {
        let out = generate_synthetic(&small_spec()).unwrap();
        let train_hist = class_histogram(&out.split.labeled_train).unwrap();
        let val_hist = class_histogram(&out.split.validation).unwrap();
        for label in EmotionLabel::ALL {
            let total = train_hist.get(label) + val_hist.get(label);
            if total == 0 {
                continue;
            }
            let frac = val_hist.get(label) as f64 / total as f64;
            let band = 1.0 / total as f64;
            assert!(
                (VALIDATION_FRACTION - band..=VALIDATION_FRACTION + band).contains(&frac),
                "class {label}: fraction {frac} outside band"
            );
        }
    }

    #[test]
    fn same_seed_is_identical_different_seed_differs() {
        let spec = small_spec();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.split, b.split);

        let other = SyntheticSpec { seed: 4, ..spec };
        let c = generate_synthetic(&other).unwrap();
        assert_ne!(a.split.labeled_train[0].visual, c.split.labeled_train[0].visual);
    }

    #[test]
    fn byte_identical_store_output_for_equal_seed() {
        let spec = small_spec();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        crate::data::store::save_feature_store(&a.split, dir_a.path()).unwrap();
        crate::data::store::save_feature_store(&b.split, dir_b.path()).unwrap();
        for file in [
            crate::data::store::MANIFEST_FILE,
            crate::data::store::LABELED_FILE,
            crate::data::store::VALIDATION_FILE,
            crate::data::store::UNLABELED_FILE,
        ] {
            let bytes_a = std::fs::read(dir_a.path().join(file)).unwrap();
            let bytes_b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(bytes_a, bytes_b, "file {file} differs between runs");
        }
    }
}
