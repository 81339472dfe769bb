//! Toy conditional DDPM over low-dimensional latents.

pub mod denoiser;
pub mod loss;
pub mod sample;
pub mod schedule;
pub mod train;

pub use denoiser::{denoise_predict, DenoiserParams, HIDDEN, LATENT_DIM, TIME_DIM};
pub use loss::{dreambooth_loss, ldm_loss, Example, LossOutput, NoisePredictor};
pub use sample::sample;
pub use schedule::{make_schedule, NoiseSchedule};
pub use train::{train, PromptTemplates, TrainConfig, TrainingSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in latent space (the clean `z_0` or a noisy `z_t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentPoint(pub Vec<f64>);

impl LatentPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `z_t = √ᾱ_t · z_0 + √(1 − ᾱ_t) · ε`
pub fn forward_noise(z0: &[f64], t: usize, eps: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    if z0.len() != eps.len() {
        return Err(Error::ShapeMismatch(format!(
            "latent has {} dims, noise has {}",
            z0.len(),
            eps.len()
        )));
    }
    if eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("forward noise"));
    }
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(z0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}
