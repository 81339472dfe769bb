use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aelif::AelifMode;
use crate::error::{Error, Result};
use crate::metrics::WinRateRow;
use crate::pipeline::config::RunConfig;
use crate::pipeline::eval::{win_rate_rows, AugRow, CategoryRobustness, TrainingSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationReport {
    pub rows: Vec<AugRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub categories: Vec<CategoryRobustness>,
    /// Arithmetic mean of the per-category best-of win rates.
    pub mean_win_best: f64,
    pub mean_win_mask: Option<f64>,
    pub mean_win_noise: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl RobustnessReport {
    pub fn new(categories: Vec<CategoryRobustness>) -> Self {
        RobustnessReport {
            mean_win_best: mean_of(categories.iter().map(|c| Some(c.win_best))).unwrap_or(f64::NAN),
            mean_win_mask: mean_of(categories.iter().map(|c| c.win_mask)),
            mean_win_noise: mean_of(categories.iter().map(|c| c.win_noise)),
            categories,
        }
    }

    pub fn win_rates(&self) -> Vec<WinRateRow> {
        win_rate_rows(&self.categories)
    }
}

/// Everything a run produced, plus the config needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub variants: Vec<AelifMode>,
    pub training: Vec<TrainingSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessReport>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::json("report", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// `item,noise_conv_vs_train,mask_vs_train,orig_vs_train`
    pub fn augmentation_csv(&self) -> Option<String> {
        let a = self.augmentation.as_ref()?;
        let mut out = String::from("item,noise_conv_vs_train,mask_vs_train,orig_vs_train\n");
        for r in &a.rows {
            let _ = writeln!(out, "{},{},{},{}", r.item, opt(r.noise_conv_vs_train), opt(r.mask_vs_train), r.orig_vs_train);
        }
        Some(out)
    }

    /// `prompt,orig,mask,noise` for one category.
    pub fn robustness_csv(category: &CategoryRobustness) -> String {
        let mut out = String::from("prompt,orig,mask,noise\n");
        for r in &category.rows {
            let _ = writeln!(out, "{},{},{},{}", r.prompt, r.orig, opt(r.mask), opt(r.noise));
        }
        out
    }

    /// `category,proportion` with a trailing `Mean` row.
    pub fn win_rate_csv(&self) -> Option<String> {
        let r = self.robustness.as_ref()?;
        let mut out = String::from("category,proportion\n");
        for row in r.win_rates() {
            let _ = writeln!(out, "{},{}", row.category, row.proportion);
        }
        let _ = writeln!(out, "Mean,{}", r.mean_win_best);
        Some(out)
    }
}

/// Writes `report.json` and the CSV tables under `dir`; returns the paths
/// written.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let empty_aug = report.augmentation.as_ref().is_none_or(|a| a.rows.is_empty());
    let empty_rob = report.robustness.as_ref().is_none_or(|r| r.categories.is_empty());
    if report.config.categories.is_empty() || (empty_aug && empty_rob) {
        return Err(Error::EmptyReport);
    }
    let mut written = Vec::new();
    let mut write = |rel: &str, contents: &str| -> Result<()> {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    write("report.json", &report.to_json())?;
    if let Some(csv) = report.augmentation_csv() {
        write("augmentation.csv", &csv)?;
    }
    if let Some(r) = &report.robustness {
        for c in &r.categories {
            write(&format!("robustness/{}.csv", c.category), &EvalReport::robustness_csv(c))?;
        }
    }
    if let Some(csv) = report.win_rate_csv() {
        write("win_rates.csv", &csv)?;
    }
    Ok(written)
}
