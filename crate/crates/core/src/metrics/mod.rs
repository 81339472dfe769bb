//! Feature extraction and distances used by both evaluation pipelines.

pub mod assignment;

use serde::{Deserialize, Serialize};

use crate::diffusion::LATENT_DIM;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{dot, norm, Matrix};

pub const FEATURE_DIM: usize = 32;
pub const FEATURE_SEED: u64 = 3_141_592_653;
/// Largest set accepted by [`w2_set`].
pub const MAX_SET_SIZE: usize = 512;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Frozen random projection followed by L2 normalization; stands in for an
/// image-embedding model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    projection: Matrix,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor::new()
    }
}

impl FeatureExtractor {
    pub fn new() -> Self {
        FeatureExtractor {
            projection: Matrix::random_normal(FEATURE_DIM, LATENT_DIM, 1.0, &mut rng::stream(FEATURE_SEED)),
        }
    }

    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    pub fn extract(&self, z: &[f64]) -> Result<Vec<f64>> {
        extract_features(z, self)
    }
}

pub fn extract_features(z: &[f64], fe: &FeatureExtractor) -> Result<Vec<f64>> {
    if z.len() != fe.projection.cols {
        return Err(Error::ShapeMismatch(format!(
            "latent has {} dims, extractor expects {}",
            z.len(),
            fe.projection.cols
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature input"));
    }
    let mut f = vec![0.0; fe.projection.rows];
    fe.projection.matvec(z, &mut f);
    let n = norm(&f);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateFeature);
    }
    f.iter_mut().for_each(|x| *x /= n);
    Ok(f)
}

fn check_unit(a: &[f64]) -> Result<()> {
    let n = norm(a);
    if (n - 1.0).abs() <= UNIT_TOLERANCE {
        Ok(())
    } else {
        Err(Error::NotUnitNorm(n))
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    check_unit(a)?;
    check_unit(b)?;
    if a == b {
        // the rounded dot product of a unit vector with itself can miss 1 by an ulp
        return Ok(1.0);
    }
    Ok(dot(a, b).clamp(-1.0, 1.0))
}

/// 2-Wasserstein distance between two Dirac measures, i.e. `‖a − b‖`.
pub fn w2_point(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    check_unit(a)?;
    check_unit(b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetLabel {
    #[serde(rename = "X_O")]
    Original,
    #[serde(rename = "X_A")]
    Augmented,
    #[serde(rename = "X_t")]
    Training,
}

/// A bag of unit-norm feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
    label: SetLabel,
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>, label: SetLabel) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyBatch)?;
        let dim = first.len();
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::LengthMismatch(dim, v.len()));
            }
            check_unit(v)?;
        }
        Ok(EmbeddingSet { vectors, label })
    }

    pub fn from_latents<'a, I>(latents: I, fe: &FeatureExtractor, label: SetLabel) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let vectors = latents
            .into_iter()
            .map(|z| extract_features(z, fe))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingSet::new(vectors, label)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn label(&self) -> SetLabel {
        self.label
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact 2-Wasserstein distance between two equal-size empirical measures:
/// `sqrt(min_π Σ_i ‖a_i − b_π(i)‖² / n)`.
pub fn w2_set(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.len() > MAX_SET_SIZE {
        return Err(Error::ShapeMismatch(format!("set of {} exceeds {MAX_SET_SIZE}", a.len())));
    }
    let cost: Vec<Vec<f64>> = a
        .vectors
        .iter()
        .map(|x| b.vectors.iter().map(|y| squared_distance(x, y)).collect())
        .collect();
    let assign = assignment::min_cost_assignment(&cost);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((total / a.len() as f64).sqrt())
}

/// 2-Wasserstein distance between diagonal Gaussians fitted to each set:
/// `sqrt(‖μ_a − μ_b‖² + Σ_k (σ_a,k − σ_b,k)²)`. Sizes may differ.
pub fn w2_gaussian_diag(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    let moments = |s: &EmbeddingSet| {
        let n = s.len() as f64;
        let dim = s.vectors[0].len();
        let mut mean = vec![0.0; dim];
        for v in &s.vectors {
            crate::tensor::axpy(1.0 / n, v, &mut mean);
        }
        let sd: Vec<f64> = (0..dim)
            .map(|k| (s.vectors.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        (mean, sd)
    };
    if a.vectors[0].len() != b.vectors[0].len() {
        return Err(Error::LengthMismatch(a.vectors[0].len(), b.vectors[0].len()));
    }
    let (ma, sa) = moments(a);
    let (mb, sb) = moments(b);
    Ok((squared_distance(&ma, &mb) + squared_distance(&sa, &sb)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SetMetric {
    #[default]
    Exact,
    GaussianDiag,
}

impl SetMetric {
    pub fn distance(self, a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
        match self {
            SetMetric::Exact => w2_set(a, b),
            SetMetric::GaussianDiag => w2_gaussian_diag(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateRow {
    pub category: String,
    pub proportion: f64,
}

/// Percentage of aligned pairs where the augmented distance is strictly
/// smaller. Ties count against the augmented model.
pub fn win_rate(d_orig: &[f64], d_aug: &[f64]) -> Result<f64> {
    if d_orig.len() != d_aug.len() {
        return Err(Error::LengthMismatch(d_orig.len(), d_aug.len()));
    }
    if d_orig.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let wins = d_orig.iter().zip(d_aug).filter(|(o, a)| a < o).count();
    Ok(100.0 * wins as f64 / d_orig.len() as f64)
}

/// Per-prompt distance of the better augmented model.
pub fn best_of_aug(d_mask: f64, d_noise: f64) -> f64 {
    d_mask.min(d_noise)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Returns 0 when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
