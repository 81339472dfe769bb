use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aelif::{AelifMode, AugmentPolicy};
use crate::diffusion::schedule::{DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_STEPS};
use crate::diffusion::{make_schedule, NoiseSchedule, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::SetMetric;
use crate::perturb::PerturbConfig;
use crate::pipeline::data::CategorySpec;

pub const DEFAULT_MASTER_SEED: u64 = 20_240_917;

/// Optimizer settings shared by every variant; seeds and augmentation are
/// filled in per category and per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            steps: d.steps,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            lambda: d.lambda,
        }
    }
}

impl TrainSettings {
    pub fn to_config(&self, seed: u64, aelif: AugmentPolicy) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            lambda: self.lambda,
            aelif,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSettings {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        ScheduleSettings {
            steps: DEFAULT_STEPS,
            beta_min: DEFAULT_BETA_MIN,
            beta_max: DEFAULT_BETA_MAX,
        }
    }
}

impl ScheduleSettings {
    pub fn build(&self) -> Result<NoiseSchedule> {
        make_schedule(self.steps, self.beta_min, self.beta_max)
    }
}

/// Where the robustness pipeline gets its perturbed prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PromptSource {
    /// Typo generator, seeded per category.
    #[default]
    Generated,
    /// Bundled prompt lists (`"sd3"` or `"sdxl"`).
    Appendix { table: String },
    /// The same explicit list for every category.
    Fixed { prompts: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub categories: Vec<CategorySpec>,
    pub train: TrainSettings,
    pub schedule: ScheduleSettings,
    /// Augmented variants trained alongside the unaugmented baseline.
    pub augmentations: Vec<AugmentPolicy>,
    pub perturb: PerturbConfig,
    pub prompts: PromptSource,
    /// Index of the instance point used as the robustness reference.
    pub ref_index: usize,
    pub set_metric: SetMetric,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: DEFAULT_MASTER_SEED,
            categories: CategorySpec::all(),
            train: TrainSettings::default(),
            schedule: ScheduleSettings::default(),
            augmentations: vec![AugmentPolicy::mask(), AugmentPolicy::noise_conv()],
            perturb: PerturbConfig::default(),
            prompts: PromptSource::Generated,
            ref_index: 0,
            set_metric: SetMetric::Exact,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    /// `none` followed by each augmented mode, in config order.
    pub fn variants(&self) -> Vec<AelifMode> {
        std::iter::once(AelifMode::None)
            .chain(self.augmentations.iter().map(|a| a.mode))
            .collect()
    }

    pub fn policy(&self, mode: AelifMode) -> AugmentPolicy {
        self.augmentations
            .iter()
            .find(|a| a.mode == mode)
            .copied()
            .unwrap_or(AugmentPolicy::NONE)
    }

    pub fn validate(&self) -> Result<()> {
        if self.augmentations.is_empty() {
            return Err(Error::Config("at least one augmented variant is required".into()));
        }
        let mut seen = Vec::new();
        for a in &self.augmentations {
            if a.mode == AelifMode::None {
                return Err(Error::Config("augmentations may not use mode \"none\"".into()));
            }
            if seen.contains(&a.mode) {
                return Err(Error::Config(format!("duplicate augmentation mode {}", a.mode)));
            }
            seen.push(a.mode);
            a.validate()?;
        }
        let mut names: Vec<&str> = self.categories.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate category names".into()));
        }
        for c in &self.categories {
            if c.instance_count == 0 || c.prior_count == 0 {
                return Err(Error::Config(format!("category {}: counts must be >= 1", c.name)));
            }
            if self.ref_index >= c.instance_count {
                return Err(Error::Config(format!(
                    "ref_index {} out of range for category {} with {} instance points",
                    self.ref_index, c.name, c.instance_count
                )));
            }
            c.templates().validate()?;
        }
        self.train.to_config(0, AugmentPolicy::NONE).validate()?;
        self.schedule.build()?;
        self.perturb.validate()?;
        if let PromptSource::Appendix { table } = &self.prompts {
            if !crate::fixtures::TABLES.contains(&table.as_str()) {
                return Err(Error::Config(format!("unknown appendix table {table:?}")));
            }
        }
        if let PromptSource::Fixed { prompts } = &self.prompts {
            if prompts.is_empty() || prompts.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::Config("fixed prompt list must be non-empty".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(
            cfg.variants(),
            vec![AelifMode::None, AelifMode::Mask, AelifMode::NoiseConv]
        );
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"master_seed": 7, "categories": [{"name": "cat"}],
                "augmentations": [{"mode": "mask", "p_max": 0.2, "mu": 0.0, "sigma": 0.0, "apply_prob": 0.5}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.categories[0].instance_count, 4);
        assert_eq!(cfg.train.steps, 5000);
        assert_eq!(cfg.variants(), vec![AelifMode::None, AelifMode::Mask]);
        assert_eq!(cfg.policy(AelifMode::NoiseConv), AugmentPolicy::NONE);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"augmentations": []}"#,
            r#"{"augmentations": [{"mode": "none", "p_max": 0.2, "mu": 0.0, "sigma": 0.0, "apply_prob": 0.5}]}"#,
            r#"{"augmentations": [{"mode": "mask", "p_max": 1.2, "mu": 0.0, "sigma": 0.0, "apply_prob": 0.5}]}"#,
            r#"{"ref_index": 4}"#,
            r#"{"train": {"learning_rate": -1}}"#,
            r#"{"schedule": {"beta_min": 0.5, "beta_max": 0.1}}"#,
            r#"{"prompts": {"kind": "appendix", "table": "sd4"}}"#,
            r#"{"categories": [{"name": "cat"}, {"name": "cat"}]}"#,
            r#"{"unknown_field": 1}"#,
        ];
        for c in cases {
            assert!(RunConfig::from_json(c).is_err(), "{c}");
        }
    }
}
