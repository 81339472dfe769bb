//! Both evaluation procedures. Every category trains one model per variant
//! from a shared initialization and a shared training seed, so the variants
//! differ only in the augmentation applied during training.

use serde::{Deserialize, Serialize};

use crate::aelif::{AelifConfig, AelifMode};
use crate::diffusion::{sample, train, DenoiserParams, NoiseSchedule, TrainingSet};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::metrics::{best_of_aug, w2_point, win_rate, EmbeddingSet, FeatureExtractor, SetLabel, WinRateRow};
use crate::perturb::gen_adversarial_set;
use crate::pipeline::config::{PromptSource, RunConfig};
use crate::pipeline::data::{synth_dataset, CategoryData, CategorySpec};
use crate::pipeline::report::{AugmentationReport, EvalReport, RobustnessReport};
use crate::rng;
use crate::text::{build_vocab, tokenize, TokenSequence, Vocabulary};

/// Loss summary of one training run: means of the first and last 100 steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub category: String,
    pub variant: AelifMode,
    pub steps: usize,
    pub leading_loss: f64,
    pub trailing_loss: f64,
}

impl TrainingSummary {
    fn new(category: &str, variant: AelifMode, trace: &[f64]) -> Self {
        let window = trace.len().min(100);
        let mean = |s: &[f64]| if s.is_empty() { f64::NAN } else { s.iter().sum::<f64>() / s.len() as f64 };
        TrainingSummary {
            category: category.to_string(),
            variant,
            steps: trace.len(),
            leading_loss: mean(&trace[..window]),
            trailing_loss: mean(&trace[trace.len() - window..]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub mode: AelifMode,
    pub params: DenoiserParams,
    pub trace: Vec<f64>,
}

/// A category's data, vocabulary and one trained model per variant.
#[derive(Debug, Clone)]
pub struct CategoryModels {
    pub spec: CategorySpec,
    pub data: CategoryData,
    pub vocab: Vocabulary,
    pub instance_tokens: TokenSequence,
    pub variants: Vec<TrainedVariant>,
}

impl CategoryModels {
    pub fn variant(&self, mode: AelifMode) -> Option<&TrainedVariant> {
        self.variants.iter().find(|v| v.mode == mode)
    }

    pub fn summaries(&self) -> Vec<TrainingSummary> {
        self.variants
            .iter()
            .map(|v| TrainingSummary::new(&self.spec.name, v.mode, &v.trace))
            .collect()
    }
}

pub fn init_params(config: &RunConfig, spec: &CategorySpec, vocab: &Vocabulary) -> DenoiserParams {
    DenoiserParams::random(vocab.size(), &mut rng::stream_for(config.master_seed, &format!("init/{}", spec.name)))
}

pub fn train_seed(config: &RunConfig, spec: &CategorySpec) -> u64 {
    rng::derive(config.master_seed, &format!("train/{}", spec.name))
}

/// Trains the variants listed in `modes` for one category.
pub fn train_category(
    config: &RunConfig,
    spec: &CategorySpec,
    schedule: &NoiseSchedule,
    modes: &[AelifMode],
) -> Result<CategoryModels> {
    let templates = spec.templates();
    let vocab = build_vocab(&templates.corpus())?;
    let data = synth_dataset(spec, config.master_seed);
    let set = TrainingSet::new(data.instance.clone(), data.prior.clone(), &templates, &vocab)?;
    let init = init_params(config, spec, &vocab);
    let seed = train_seed(config, spec);
    let mut variants = Vec::with_capacity(modes.len());
    for &mode in modes {
        let tc = config.train.to_config(seed, config.policy(mode));
        let (params, trace) = train(&init, &set, schedule, &tc)?;
        variants.push(TrainedVariant { mode, params, trace });
    }
    Ok(CategoryModels {
        spec: spec.clone(),
        instance_tokens: set.instance_tokens,
        data,
        vocab,
        variants,
    })
}

/// Pipeline A row: set-level distance between each variant's samples and the
/// instance set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugRow {
    pub item: String,
    pub noise_conv_vs_train: Option<f64>,
    pub mask_vs_train: Option<f64>,
    pub orig_vs_train: f64,
}

pub fn augmentation_row(
    config: &RunConfig,
    models: &CategoryModels,
    schedule: &NoiseSchedule,
    fe: &FeatureExtractor,
) -> Result<AugRow> {
    let name = &models.spec.name;
    let train_set = EmbeddingSet::from_latents(models.data.instance.iter().map(Vec::as_slice), fe, SetLabel::Training)?;
    let seed_root = rng::derive(config.master_seed, &format!("sample-aug/{name}"));
    let distance = |mode: AelifMode| -> Result<Option<f64>> {
        let Some(v) = models.variant(mode) else { return Ok(None) };
        let samples = (0..models.data.instance.len())
            .map(|k| {
                let mut r = rng::stream(rng::derive_index(seed_root, k as u64));
                sample(&v.params, &models.instance_tokens, schedule, &mut r, &AelifConfig::NONE)
            })
            .collect::<Result<Vec<_>>>()?;
        let label = if mode == AelifMode::None { SetLabel::Original } else { SetLabel::Augmented };
        let set = EmbeddingSet::from_latents(samples.iter().map(|z| z.as_slice()), fe, label)?;
        config.set_metric.distance(&set, &train_set).map(Some)
    };
    Ok(AugRow {
        item: name.clone(),
        noise_conv_vs_train: distance(AelifMode::NoiseConv)?,
        mask_vs_train: distance(AelifMode::Mask)?,
        orig_vs_train: distance(AelifMode::None)?.expect("baseline variant is always trained"),
    })
}

/// Pipeline B row: distance from one variant's sample to the reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRow {
    pub prompt: String,
    pub orig: f64,
    pub mask: Option<f64>,
    pub noise: Option<f64>,
}

impl PromptRow {
    /// Smallest augmented distance, if any augmented variant ran.
    pub fn best(&self) -> Option<f64> {
        match (self.mask, self.noise) {
            (Some(m), Some(n)) => Some(best_of_aug(m, n)),
            (m, n) => m.or(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRobustness {
    pub category: String,
    pub reference_index: usize,
    pub rows: Vec<PromptRow>,
    /// Percent of prompts where the best augmented variant beats the baseline.
    pub win_best: f64,
    pub win_mask: Option<f64>,
    pub win_noise: Option<f64>,
}

pub fn category_prompts(config: &RunConfig, spec: &CategorySpec) -> Result<Vec<String>> {
    match &config.prompts {
        PromptSource::Generated => {
            let template = spec.templates().instance_prompt;
            let mut r = rng::stream_for(config.master_seed, &format!("perturb/{}", spec.name));
            gen_adversarial_set(&template, &config.perturb, &mut r)
        }
        PromptSource::Appendix { table } => fixtures::prompts(table, &spec.name),
        PromptSource::Fixed { prompts } => Ok(prompts.clone()),
    }
}

pub fn robustness_rows(
    config: &RunConfig,
    models: &CategoryModels,
    prompts: &[String],
    schedule: &NoiseSchedule,
    fe: &FeatureExtractor,
) -> Result<CategoryRobustness> {
    let name = &models.spec.name;
    let reference = fe.extract(&models.data.instance[config.ref_index])?;
    let seed_root = rng::derive(config.master_seed, &format!("sample-robust/{name}"));
    let mut rows = Vec::with_capacity(prompts.len());
    for (i, prompt) in prompts.iter().enumerate() {
        let tokens = tokenize(prompt, &models.vocab)?;
        let seed = rng::derive_index(seed_root, i as u64);
        let distance = |mode: AelifMode| -> Result<Option<f64>> {
            let Some(v) = models.variant(mode) else { return Ok(None) };
            let z = sample(&v.params, &tokens, schedule, &mut rng::stream(seed), &AelifConfig::NONE)?;
            w2_point(&fe.extract(z.as_slice())?, &reference).map(Some)
        };
        rows.push(PromptRow {
            prompt: prompt.clone(),
            orig: distance(AelifMode::None)?.expect("baseline variant is always trained"),
            mask: distance(AelifMode::Mask)?,
            noise: distance(AelifMode::NoiseConv)?,
        });
    }
    let orig: Vec<f64> = rows.iter().map(|r| r.orig).collect();
    let column = |f: fn(&PromptRow) -> Option<f64>| -> Result<Option<f64>> {
        let col: Option<Vec<f64>> = rows.iter().map(f).collect();
        col.map(|c| win_rate(&orig, &c)).transpose()
    };
    Ok(CategoryRobustness {
        category: name.clone(),
        reference_index: config.ref_index,
        win_best: column(PromptRow::best)?.ok_or_else(|| Error::Config("no augmented variant".into()))?,
        win_mask: column(|r| r.mask)?,
        win_noise: column(|r| r.noise)?,
        rows,
    })
}

/// Which procedures to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Procedures {
    pub augmentation: bool,
    pub robustness: bool,
}

struct CategoryOutcome {
    training: Vec<TrainingSummary>,
    aug: Option<AugRow>,
    robust: Option<CategoryRobustness>,
}

fn run_category(
    config: &RunConfig,
    spec: &CategorySpec,
    schedule: &NoiseSchedule,
    which: Procedures,
) -> Result<CategoryOutcome> {
    let fe = FeatureExtractor::new();
    let models = train_category(config, spec, schedule, &config.variants())?;
    let aug = which
        .augmentation
        .then(|| augmentation_row(config, &models, schedule, &fe))
        .transpose()?;
    let robust = which
        .robustness
        .then(|| {
            let prompts = category_prompts(config, spec)?;
            robustness_rows(config, &models, &prompts, schedule, &fe)
        })
        .transpose()?;
    Ok(CategoryOutcome {
        training: models.summaries(),
        aug,
        robust,
    })
}

#[cfg(feature = "parallel")]
fn map_categories<F>(specs: &[CategorySpec], f: F) -> Vec<Result<CategoryOutcome>>
where
    F: Fn(&CategorySpec) -> Result<CategoryOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    specs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_categories<F>(specs: &[CategorySpec], f: F) -> Vec<Result<CategoryOutcome>>
where
    F: Fn(&CategorySpec) -> Result<CategoryOutcome>,
{
    specs.iter().map(f).collect()
}

/// Trains every category once and runs the selected procedures on the
/// shared models. Categories may run in parallel; output is ordered by name.
pub fn run_eval(config: &RunConfig, which: Procedures) -> Result<EvalReport> {
    config.validate()?;
    if config.categories.is_empty() {
        return Err(Error::EmptyReport);
    }
    let schedule = config.schedule.build()?;
    let mut specs = config.categories.clone();
    specs.sort_by(|a, b| a.name.cmp(&b.name));
    let outcomes = map_categories(&specs, |spec| {
        run_category(config, spec, &schedule, which).map_err(|e| e.in_category(&spec.name))
    });

    let mut training = Vec::new();
    let mut aug_rows = Vec::new();
    let mut robust = Vec::new();
    for outcome in outcomes {
        let o = outcome?;
        training.extend(o.training);
        aug_rows.extend(o.aug);
        robust.extend(o.robust);
    }
    Ok(EvalReport {
        config: config.clone(),
        variants: config.variants(),
        training,
        augmentation: which.augmentation.then_some(AugmentationReport { rows: aug_rows }),
        robustness: which.robustness.then(|| RobustnessReport::new(robust)),
    })
}

pub fn run_augmentation_eval(config: &RunConfig) -> Result<EvalReport> {
    run_eval(config, Procedures { augmentation: true, robustness: false })
}

pub fn run_robustness_eval(config: &RunConfig) -> Result<EvalReport> {
    run_eval(config, Procedures { augmentation: false, robustness: true })
}

pub fn run_full_eval(config: &RunConfig) -> Result<EvalReport> {
    run_eval(config, Procedures { augmentation: true, robustness: true })
}

/// Per-category best-of win rates as table rows.
pub fn win_rate_rows(categories: &[CategoryRobustness]) -> Vec<WinRateRow> {
    categories
        .iter()
        .map(|c| WinRateRow {
            category: c.category.clone(),
            proportion: c.win_best,
        })
        .collect()
}
