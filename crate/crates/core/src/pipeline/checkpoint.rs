//! Trained-model persistence as a single JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{DenoiserParams, NoiseSchedule, PromptTemplates, TrainConfig};
use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::text::{TextEncoderParams, Vocabulary};

/// Noise-predictor weights without the text encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w3: Matrix,
    pub b3: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub templates: PromptTemplates,
    pub vocabulary: Vocabulary,
    pub encoder: TextEncoderParams,
    pub denoiser: MlpWeights,
    pub schedule: NoiseSchedule,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(
        config: TrainConfig,
        templates: PromptTemplates,
        vocabulary: Vocabulary,
        params: &DenoiserParams,
        schedule: NoiseSchedule,
    ) -> Self {
        let p = params.clone();
        Checkpoint {
            seed: config.seed,
            config,
            templates,
            vocabulary,
            encoder: p.text,
            denoiser: MlpWeights {
                w1: p.w1,
                b1: p.b1,
                w2: p.w2,
                b2: p.b2,
                w3: p.w3,
                b3: p.b3,
            },
            schedule,
        }
    }

    pub fn params(&self) -> DenoiserParams {
        let d = self.denoiser.clone();
        DenoiserParams {
            w1: d.w1,
            b1: d.b1,
            w2: d.w2,
            b2: d.b2,
            w3: d.w3,
            b3: d.b3,
            text: self.encoder.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vocabulary.validate()?;
        if self.encoder.vocab_size() != self.vocabulary.size() {
            return Err(Error::ShapeMismatch(format!(
                "encoder has {} rows, vocabulary has {} ids",
                self.encoder.vocab_size(),
                self.vocabulary.size()
            )));
        }
        self.params().check_shapes()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s).map_err(|e| Error::json("checkpoint", e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
