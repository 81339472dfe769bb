//! DreamBooth-style fine-tuning with plain SGD.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aelif::AugmentPolicy;
use crate::diffusion::denoiser::DenoiserParams;
use crate::diffusion::loss::{dreambooth_loss, Example};
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::text::{tokenize, TokenSequence, Vocabulary};

/// Identifier token bound to the subject.
pub const IDENTIFIER: &str = "sks";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub instance_prompt: String,
    pub prior_prompt: String,
}

impl PromptTemplates {
    /// `"a photo of sks <item>"` / `"a photo of a <item>"`.
    pub fn for_item(item: &str) -> Self {
        PromptTemplates {
            instance_prompt: format!("a photo of {IDENTIFIER} {item}"),
            prior_prompt: format!("a photo of a {item}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.instance_prompt.split_whitespace().any(|w| w == IDENTIFIER) {
            return Err(Error::Config(format!(
                "instance prompt {:?} lacks the identifier {IDENTIFIER:?}",
                self.instance_prompt
            )));
        }
        Ok(())
    }

    pub fn corpus(&self) -> [&str; 2] {
        [&self.instance_prompt, &self.prior_prompt]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub lambda: f64,
    pub aelif: AugmentPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 5000,
            batch_size: 32,
            learning_rate: 1e-2,
            seed: 0,
            lambda: 1.0,
            aelif: AugmentPolicy::NONE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidTrainConfig("batch_size must be >= 2".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidTrainConfig("learning_rate must be > 0".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidTrainConfig("lambda must be >= 0".into()));
        }
        self.aelif.validate()
    }
}

/// Instance latents paired with the identifier prompt, prior latents paired
/// with the class prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub instance: Vec<Vec<f64>>,
    pub prior: Vec<Vec<f64>>,
    pub instance_tokens: TokenSequence,
    pub prior_tokens: TokenSequence,
}

impl TrainingSet {
    pub fn new(
        instance: Vec<Vec<f64>>,
        prior: Vec<Vec<f64>>,
        templates: &PromptTemplates,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        templates.validate()?;
        Ok(TrainingSet {
            instance,
            prior,
            instance_tokens: tokenize(&templates.instance_prompt, vocab)?,
            prior_tokens: tokenize(&templates.prior_prompt, vocab)?,
        })
    }
}

/// Cycles through a seeded shuffle of `0..len`, reshuffling each pass.
struct EpochSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: Stream,
}

impl EpochSampler {
    fn new(len: usize, mut rng: Stream) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        EpochSampler { order, cursor: 0, rng }
    }

    fn next_index(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let i = self.order[self.cursor];
        self.cursor += 1;
        i
    }
}

/// Runs `config.steps` SGD steps on half-instance / half-prior batches and
/// returns the updated parameters with the per-step loss.
pub fn train(
    params: &DenoiserParams,
    data: &TrainingSet,
    schedule: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<(DenoiserParams, Vec<f64>)> {
    config.validate()?;
    params.check_shapes()?;
    if data.instance.is_empty() || data.prior.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut params = params.clone();
    let mut trace = Vec::with_capacity(config.steps);
    if config.steps == 0 {
        return Ok((params, trace));
    }

    let half = config.batch_size / 2;
    let mut inst_sampler = EpochSampler::new(data.instance.len(), rng::stream_for(config.seed, "shuffle/instance"));
    let mut prior_sampler = EpochSampler::new(data.prior.len(), rng::stream_for(config.seed, "shuffle/prior"));
    let step_root = rng::derive(config.seed, "step");

    for step in 0..config.steps {
        let inst: Vec<Example> = (0..half)
            .map(|_| Example {
                z0: data.instance[inst_sampler.next_index()].clone(),
                tokens: data.instance_tokens.clone(),
            })
            .collect();
        let prior: Vec<Example> = (0..config.batch_size - half)
            .map(|_| Example {
                z0: data.prior[prior_sampler.next_index()].clone(),
                tokens: data.prior_tokens.clone(),
            })
            .collect();
        let out = dreambooth_loss(
            &params,
            &inst,
            &prior,
            config.lambda,
            schedule,
            &config.aelif,
            rng::derive_index(step_root, step as u64),
        )?;
        if !out.loss.is_finite() {
            return Err(Error::Diverged { step, loss: out.loss });
        }
        params.add_scaled(-config.learning_rate, &out.grad);
        if !params.is_finite() {
            return Err(Error::Diverged { step, loss: out.loss });
        }
        trace.push(out.loss);
    }
    Ok((params, trace))
}

/// `step,loss` CSV.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}
