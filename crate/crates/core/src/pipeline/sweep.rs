//! Inference-time noise-magnitude sweep: how far do samples drift from the
//! unaugmented sample as more prompt tokens are noise-convolved?

use serde::{Deserialize, Serialize};

use crate::aelif::AelifConfig;
use crate::diffusion::{sample, DenoiserParams, NoiseSchedule};
use crate::error::{Error, Result};
use crate::metrics::{cosine_similarity, median, spearman, FeatureExtractor};
use crate::rng;
use crate::text::TokenSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub seeds: usize,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: (0..10).map(|i| i as f64 / 10.0).collect(),
            seeds: 32,
            mu: 0.0,
            sigma: 100.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    /// `cosine[i][s]`: grid point `i`, seed `s`.
    pub cosine: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    pub spearman: f64,
}

/// For each seed, samples once clean and once per grid point with the same
/// latent noise path, and compares features by cosine similarity.
pub fn noise_sweep(
    params: &DenoiserParams,
    tokens: &TokenSequence,
    schedule: &NoiseSchedule,
    config: &SweepConfig,
) -> Result<SweepResult> {
    if config.grid.len() < 2 || config.seeds == 0 {
        return Err(Error::Config("sweep needs at least two grid points and one seed".into()));
    }
    let fe = FeatureExtractor::new();
    let seed_root = rng::derive(config.seed, "sweep");
    let mut cosine = vec![Vec::with_capacity(config.seeds); config.grid.len()];
    for s in 0..config.seeds {
        let seed = rng::derive_index(seed_root, s as u64);
        let draw = |aelif: &AelifConfig| -> Result<Vec<f64>> {
            let z = sample(params, tokens, schedule, &mut rng::stream(seed), aelif)?;
            fe.extract(z.as_slice())
        };
        let clean = draw(&AelifConfig::NONE)?;
        for (i, &p) in config.grid.iter().enumerate() {
            let f = draw(&AelifConfig::noise_conv(p, config.mu, config.sigma))?;
            cosine[i].push(cosine_similarity(&clean, &f)?);
        }
    }
    let median: Vec<f64> = cosine.iter().map(|c| median(c)).collect();
    let spearman = spearman(&config.grid, &median)?;
    Ok(SweepResult {
        grid: config.grid.clone(),
        cosine,
        median,
        spearman,
    })
}

impl SweepResult {
    /// `p,median_cosine`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,median_cosine\n");
        for (p, m) in self.grid.iter().zip(&self.median) {
            out.push_str(&format!("{p},{m}\n"));
        }
        out
    }
}
