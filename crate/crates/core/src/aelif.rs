//! Post-encoder embedding augmentations.
//!
//! Both operators pick `⌊L·p⌋` token positions uniformly without replacement.
//! Masking replaces each picked vector with zeros; noise convolution
//! multiplies it elementwise by a fresh `N(μ, σ²)` vector of the same width.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::EmbeddingSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AelifMode {
    #[default]
    None,
    Mask,
    NoiseConv,
}

impl AelifMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AelifMode::None => "none",
            AelifMode::Mask => "mask",
            AelifMode::NoiseConv => "noise_conv",
        }
    }
}

impl std::str::FromStr for AelifMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AelifMode::None),
            "mask" => Ok(AelifMode::Mask),
            "noise_conv" => Ok(AelifMode::NoiseConv),
            other => Err(Error::Config(format!("unknown augmentation mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for AelifMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single augmentation at a fixed magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AelifConfig {
    pub mode: AelifMode,
    pub p: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl AelifConfig {
    pub const NONE: AelifConfig = AelifConfig {
        mode: AelifMode::None,
        p: 0.0,
        mu: 0.0,
        sigma: 0.0,
    };

    pub fn mask(p: f64) -> Self {
        AelifConfig {
            mode: AelifMode::Mask,
            p,
            mu: 0.0,
            sigma: 0.0,
        }
    }

    pub fn noise_conv(p: f64, mu: f64, sigma: f64) -> Self {
        AelifConfig {
            mode: AelifMode::NoiseConv,
            p,
            mu,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_magnitude(self.p)?;
        if !(self.sigma >= 0.0) {
            return Err(Error::NegativeSigma(self.sigma));
        }
        Ok(())
    }

    /// Draws the concrete perturbation for a sequence of `len` tokens of width `dim`.
    pub fn draw<R: Rng + ?Sized>(&self, len: usize, dim: usize, rng: &mut R) -> Result<Augmentation> {
        self.validate()?;
        let edits = match self.mode {
            AelifMode::None => Vec::new(),
            AelifMode::Mask => select_positions(len, self.p, rng)?
                .positions
                .into_iter()
                .map(|i| (i, TokenEdit::Zero))
                .collect(),
            AelifMode::NoiseConv => {
                let selection = select_positions(len, self.p, rng)?;
                selection
                    .positions
                    .into_iter()
                    .map(|i| {
                        let noise = (0..dim)
                            .map(|_| self.mu + self.sigma * rng.sample::<f64, _>(StandardNormal))
                            .collect();
                        (i, TokenEdit::Scale(noise))
                    })
                    .collect()
            }
        };
        Ok(Augmentation { len, dim, edits })
    }
}

/// Training-time augmentation schedule: each example is augmented with
/// probability `apply_prob`, at a magnitude drawn uniformly from `[0, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub mode: AelifMode,
    pub p_max: f64,
    pub mu: f64,
    pub sigma: f64,
    pub apply_prob: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy::NONE
    }
}

impl AugmentPolicy {
    pub const NONE: AugmentPolicy = AugmentPolicy {
        mode: AelifMode::None,
        p_max: 0.0,
        mu: 0.0,
        sigma: 0.0,
        apply_prob: 0.0,
    };

    pub fn mask() -> Self {
        AugmentPolicy {
            mode: AelifMode::Mask,
            p_max: 0.3,
            mu: 0.0,
            sigma: 0.0,
            apply_prob: 0.5,
        }
    }

    pub fn noise_conv() -> Self {
        AugmentPolicy {
            mode: AelifMode::NoiseConv,
            p_max: 0.3,
            mu: 0.0,
            sigma: 1.0,
            apply_prob: 0.5,
        }
    }

    pub fn for_mode(mode: AelifMode) -> Self {
        match mode {
            AelifMode::None => AugmentPolicy::NONE,
            AelifMode::Mask => AugmentPolicy::mask(),
            AelifMode::NoiseConv => AugmentPolicy::noise_conv(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_magnitude(self.p_max)?;
        if !(0.0..=1.0).contains(&self.apply_prob) {
            return Err(Error::Config(format!("apply_prob {} outside [0, 1]", self.apply_prob)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::NegativeSigma(self.sigma));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, len: usize, dim: usize, rng: &mut R) -> Result<Augmentation> {
        if self.mode == AelifMode::None {
            return Ok(Augmentation::identity(len, dim));
        }
        let apply = rng.random::<f64>() < self.apply_prob;
        let p = self.p_max * rng.random::<f64>();
        if !apply {
            return Ok(Augmentation::identity(len, dim));
        }
        AelifConfig {
            mode: self.mode,
            p,
            mu: self.mu,
            sigma: self.sigma,
        }
        .draw(len, dim, rng)
    }
}

fn check_magnitude(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::MagnitudeOutOfRange(p))
    }
}

/// Number of positions touched at magnitude `p`: `⌊L·p⌋`.
///
/// The product is nudged by a few ulps so that grid values such as `p = 0.7`
/// (stored just below 7/10) still floor to the exact rational count.
pub fn selection_count(len: usize, p: f64) -> usize {
    let raw = len as f64 * p;
    let n = (raw + raw.abs() * 4.0 * f64::EPSILON).floor() as usize;
    n.min(len)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionSelection {
    /// Sorted, distinct positions.
    pub positions: Vec<usize>,
}

impl PositionSelection {
    pub fn n(&self) -> usize {
        self.positions.len()
    }
}

/// Picks `⌊L·p⌋` distinct positions in `[0, L)` by a partial Fisher–Yates shuffle.
pub fn select_positions<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Result<PositionSelection> {
    check_magnitude(p)?;
    if len == 0 {
        return Err(Error::BadSequenceLength {
            len,
            max: crate::text::MAX_LEN,
        });
    }
    let n = selection_count(len, p);
    let mut order: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = rng.random_range(i..len);
        order.swap(i, j);
    }
    let mut positions = order[..n].to_vec();
    positions.sort_unstable();
    Ok(PositionSelection { positions })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenEdit {
    Zero,
    Scale(Vec<f64>),
}

/// A drawn perturbation: which token vectors change and how.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    len: usize,
    dim: usize,
    edits: Vec<(usize, TokenEdit)>,
}

impl Augmentation {
    pub fn identity(len: usize, dim: usize) -> Self {
        Augmentation {
            len,
            dim,
            edits: Vec::new(),
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.edits.iter().map(|(i, _)| *i)
    }

    pub fn is_identity(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn apply(&self, z: &EmbeddingSequence) -> Result<EmbeddingSequence> {
        self.check_shape(z)?;
        let mut out = z.clone();
        for (i, edit) in &self.edits {
            let v = out.vector_mut(*i);
            match edit {
                TokenEdit::Zero => v.iter_mut().for_each(|x| *x = 0.0),
                TokenEdit::Scale(noise) => v.iter_mut().zip(noise).for_each(|(x, n)| *x *= n),
            }
        }
        Ok(out)
    }

    /// Backpropagates through the elementwise edit at position `i`:
    /// `grad ← grad ⊙ ∂z'_i/∂z_i`.
    pub fn backprop(&self, i: usize, grad: &mut [f64]) {
        if let Ok(k) = self.edits.binary_search_by_key(&i, |(p, _)| *p) {
            match &self.edits[k].1 {
                TokenEdit::Zero => grad.iter_mut().for_each(|g| *g = 0.0),
                TokenEdit::Scale(noise) => grad.iter_mut().zip(noise).for_each(|(g, n)| *g *= n),
            }
        }
    }

    fn check_shape(&self, z: &EmbeddingSequence) -> Result<()> {
        if z.len() != self.len || z.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "augmentation drawn for {}x{}, sequence is {}x{}",
                self.len,
                self.dim,
                z.len(),
                z.dim()
            )));
        }
        Ok(())
    }
}

pub fn aelif_mask<R: Rng + ?Sized>(z: &EmbeddingSequence, p: f64, rng: &mut R) -> Result<EmbeddingSequence> {
    AelifConfig::mask(p).draw(z.len(), z.dim(), rng)?.apply(z)
}

pub fn aelif_noise_conv<R: Rng + ?Sized>(
    z: &EmbeddingSequence,
    p: f64,
    mu: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<EmbeddingSequence> {
    AelifConfig::noise_conv(p, mu, sigma)
        .draw(z.len(), z.dim(), rng)?
        .apply(z)
}

/// Applies `config` to `z` with randomness from `rng`.
pub fn augment<R: Rng + ?Sized>(
    z: &EmbeddingSequence,
    config: &AelifConfig,
    rng: &mut R,
) -> Result<EmbeddingSequence> {
    config.draw(z.len(), z.dim(), rng)?.apply(z)
}
