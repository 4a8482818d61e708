//! Noise embedding enhancement: a diffusion-style forward schedule applied
//! at the feature-vector level.
//!
//! A linear beta schedule over T steps yields cumulative products
//! alpha_bar_t = prod_{s<=t} (1 - beta_s); a noised view of a feature f at
//! step t is sqrt(alpha_bar_t) * f + sqrt(1 - alpha_bar_t) * eps with
//! standard Gaussian eps. By default the terminal step T is used.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::seeds::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// alpha_bar at 1-based step t.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.steps() {
            return Err(Error::contract(format!(
                "step {t} outside schedule range 1..={}",
                self.steps()
            )));
        }
        Ok(self.alpha_bars[t - 1])
    }

    /// Terminal alpha_bar_T.
    pub fn alpha_bar_final(&self) -> f64 {
        *self.alpha_bars.last().expect("schedule has at least one step")
    }

    /// Builds a schedule from explicit beta values without range checks.
    /// Exists for tests and custom schedules (e.g. the all-zero identity
    /// schedule); `build_schedule` is the validated path.
    pub fn from_betas_unchecked(betas: Vec<f64>) -> Self {
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prod = 1.0;
        for &beta in &betas {
            prod *= 1.0 - beta;
            alpha_bars.push(prod);
        }
        NoiseSchedule { betas, alpha_bars }
    }
}

/// Builds the linear beta schedule from `beta1` at step 1 to `betaT` at
/// step T, with cumulative alpha_bar products.
pub fn build_schedule(t_steps: usize, beta1: f64, beta_t: f64) -> Result<NoiseSchedule> {
    if t_steps < 1 {
        return Err(Error::config("noise schedule: T must be >= 1"));
    }
    if !(beta1 > 0.0 && beta1 <= beta_t && beta_t < 1.0) {
        return Err(Error::config(format!(
            "noise schedule: need 0 < beta1 <= betaT < 1, got beta1={beta1}, betaT={beta_t}"
        )));
    }
    let betas: Vec<f64> = if t_steps == 1 {
        vec![beta1]
    } else {
        (0..t_steps)
            .map(|i| beta1 + (beta_t - beta1) * (i as f64) / ((t_steps - 1) as f64))
            .collect()
    };
    Ok(NoiseSchedule::from_betas_unchecked(betas))
}

/// A noised view of one modality's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisedEmbedding {
    pub modality: Modality,
    pub vector: Vec<f64>,
    pub step_used: usize,
}

/// Noises a feature at the terminal step T (the default behaviour).
pub fn noise_embed(
    modality: Modality,
    feature: &[f64],
    schedule: &NoiseSchedule,
    rng_seed: u64,
) -> Result<NoisedEmbedding> {
    noise_embed_at(modality, feature, schedule, schedule.steps(), rng_seed)
}

/// Noises a feature at an explicit 1-based step t. Deterministic given the
/// seed.
pub fn noise_embed_at(
    modality: Modality,
    feature: &[f64],
    schedule: &NoiseSchedule,
    step: usize,
    rng_seed: u64,
) -> Result<NoisedEmbedding> {
    if feature.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract(
            "noise_embed requires a finite feature vector".to_string(),
        ));
    }
    let alpha_bar = schedule.alpha_bar(step)?;
    let signal = alpha_bar.sqrt();
    let noise = (1.0 - alpha_bar).sqrt();
    let mut rng = rng_from(rng_seed);
    let vector = feature
        .iter()
        .map(|&f| {
            let eps: f64 = rng.sample(StandardNormal);
            signal * f + noise * eps
        })
        .collect();
    Ok(NoisedEmbedding {
        modality,
        vector,
        step_used: step,
    })
}
