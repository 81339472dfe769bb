//! Synthetic stand-ins for subject datasets: each category is a Gaussian
//! cluster in latent space, and its instance set is a tight clump around a
//! sub-center one unit away from the cluster mean.

use serde::{Deserialize, Serialize};

use crate::diffusion::{PromptTemplates, LATENT_DIM};
use crate::rng;
use crate::tensor::normal_vec;

/// Category folder names, in the order the evaluation tables list them.
pub const CATEGORIES: [&str; 11] = [
    "backpack",
    "candle",
    "dog_data",
    "cat",
    "colorful_sneaker",
    "dog2",
    "dog3",
    "backpack_dog",
    "clock",
    "vase",
    "teapot",
];

/// Scale of category means: `c_cat ∼ N(0, CENTER_SCALE² I)`.
pub const CENTER_SCALE: f64 = 2.0;
/// Per-coordinate standard deviation of class (prior) points.
pub const PRIOR_SD: f64 = 0.5;
/// Per-coordinate standard deviation of instance points.
pub const INSTANCE_SD: f64 = 0.05;
/// Distance from the category mean to the instance sub-center.
pub const INSTANCE_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    pub name: String,
    /// Prompt noun; derived from `name` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    /// Seed for the instance offset and the sampled points; derived from the
    /// master seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_seed: Option<u64>,
    #[serde(default = "default_instance_count")]
    pub instance_count: usize,
    #[serde(default = "default_prior_count")]
    pub prior_count: usize,
}

fn default_instance_count() -> usize {
    4
}

fn default_prior_count() -> usize {
    200
}

impl CategorySpec {
    pub fn new(name: &str) -> Self {
        CategorySpec {
            name: name.to_string(),
            item: None,
            cluster_seed: None,
            instance_count: default_instance_count(),
            prior_count: default_prior_count(),
        }
    }

    pub fn all() -> Vec<CategorySpec> {
        CATEGORIES.iter().map(|n| CategorySpec::new(n)).collect()
    }

    pub fn item(&self) -> String {
        self.item.clone().unwrap_or_else(|| item_word(&self.name))
    }

    pub fn templates(&self) -> PromptTemplates {
        PromptTemplates::for_item(&self.item())
    }

    pub fn cluster_seed(&self, master_seed: u64) -> u64 {
        self.cluster_seed
            .unwrap_or_else(|| rng::derive(master_seed, &format!("cluster/{}", self.name)))
    }
}

/// Prompt noun for a category folder name (`dog2` → `dog`,
/// `colorful_sneaker` → `sneaker`).
pub fn item_word(name: &str) -> String {
    match name {
        "dog_data" | "dog2" | "dog3" => "dog".into(),
        "backpack_dog" => "backpack".into(),
        "colorful_sneaker" => "sneaker".into(),
        other => other
            .trim_end_matches(|c: char| c.is_ascii_digit())
            .replace('_', " ")
            .trim()
            .to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryData {
    pub center: Vec<f64>,
    pub instance_center: Vec<f64>,
    pub instance: Vec<Vec<f64>>,
    pub prior: Vec<Vec<f64>>,
}

pub fn synth_dataset(spec: &CategorySpec, master_seed: u64) -> CategoryData {
    let mut mean_rng = rng::stream_for(master_seed, &format!("category-mean/{}", spec.name));
    let center: Vec<f64> = normal_vec(LATENT_DIM, &mut mean_rng)
        .into_iter()
        .map(|x| CENTER_SCALE * x)
        .collect();

    let mut r = rng::stream(spec.cluster_seed(master_seed));
    let dir = normal_vec(LATENT_DIM, &mut r);
    let dir_norm = crate::tensor::norm(&dir);
    let instance_center: Vec<f64> = center
        .iter()
        .zip(&dir)
        .map(|(c, d)| c + INSTANCE_OFFSET * d / dir_norm)
        .collect();

    let mut draw = |mean: &[f64], sd: f64| -> Vec<f64> {
        normal_vec(LATENT_DIM, &mut r)
            .into_iter()
            .zip(mean)
            .map(|(e, m)| m + sd * e)
            .collect()
    };
    let instance = (0..spec.instance_count).map(|_| draw(&instance_center, INSTANCE_SD)).collect();
    let prior = (0..spec.prior_count).map(|_| draw(&center, PRIOR_SD)).collect();
    CategoryData {
        center,
        instance_center,
        instance,
        prior,
    }
}
