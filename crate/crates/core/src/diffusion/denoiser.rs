//! Noise predictor `ε_θ(z_t, t, c)`: a two-hidden-layer SiLU MLP over the
//! concatenation of the noisy latent, sinusoidal time features and the
//! pooled prompt embedding. Gradients are derived by hand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{axpy, Matrix};
use crate::text::{TextEncoderParams, EMBED_DIM};

pub const LATENT_DIM: usize = 8;
pub const TIME_DIM: usize = 8;
pub const HIDDEN: usize = 64;
pub const INPUT_DIM: usize = LATENT_DIM + TIME_DIM + EMBED_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w3: Matrix,
    pub b3: Vec<f64>,
    pub text: TextEncoderParams,
}

/// `[sin(tω_k), cos(tω_k)]` for `ω_k = 10000^{-k/4}`, `k = 0..4`.
pub fn time_features(t: usize) -> [f64; TIME_DIM] {
    let mut out = [0.0; TIME_DIM];
    for k in 0..TIME_DIM / 2 {
        let omega = 10000f64.powf(-(k as f64) / (TIME_DIM / 2) as f64);
        let angle = t as f64 * omega;
        out[2 * k] = angle.sin();
        out[2 * k + 1] = angle.cos();
    }
    out
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre1: Vec<f64>,
    pub h1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub h2: Vec<f64>,
    pub output: Vec<f64>,
}

impl DenoiserParams {
    pub fn zeros(vocab_size: usize) -> Self {
        DenoiserParams {
            w1: Matrix::zeros(HIDDEN, INPUT_DIM),
            b1: vec![0.0; HIDDEN],
            w2: Matrix::zeros(HIDDEN, HIDDEN),
            b2: vec![0.0; HIDDEN],
            w3: Matrix::zeros(LATENT_DIM, HIDDEN),
            b3: vec![0.0; LATENT_DIM],
            text: TextEncoderParams::zeros(vocab_size, EMBED_DIM),
        }
    }

    /// Fan-in scaled Gaussian weights, zero biases, random text encoder.
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, rng: &mut R) -> Self {
        let w1 = Matrix::random_normal(HIDDEN, INPUT_DIM, (1.0 / INPUT_DIM as f64).sqrt(), rng);
        let w2 = Matrix::random_normal(HIDDEN, HIDDEN, (1.0 / HIDDEN as f64).sqrt(), rng);
        let w3 = Matrix::random_normal(LATENT_DIM, HIDDEN, (1.0 / HIDDEN as f64).sqrt(), rng);
        let text = TextEncoderParams::random(vocab_size, EMBED_DIM, rng);
        DenoiserParams {
            w1,
            b1: vec![0.0; HIDDEN],
            w2,
            b2: vec![0.0; HIDDEN],
            w3,
            b3: vec![0.0; LATENT_DIM],
            text,
        }
    }

    pub fn zeros_like(&self) -> Self {
        DenoiserParams::zeros(self.text.vocab_size())
    }

    pub fn vocab_size(&self) -> usize {
        self.text.vocab_size()
    }

    pub fn slices(&self) -> [&[f64]; 8] {
        [
            &self.w1.data,
            &self.b1,
            &self.w2.data,
            &self.b2,
            &self.w3.data,
            &self.b3,
            &self.text.embedding_table.data,
            &self.text.positional_table.data,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.w1.data,
            &mut self.b1,
            &mut self.w2.data,
            &mut self.b2,
            &mut self.w3.data,
            &mut self.b3,
            &mut self.text.embedding_table.data,
            &mut self.text.positional_table.data,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// All parameters in a fixed order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().iter().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn get_flat(&self, mut index: usize) -> f64 {
        for s in self.slices() {
            if index < s.len() {
                return s[index];
            }
            index -= s.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_flat(&mut self, mut index: usize, value: f64) {
        for s in self.slices_mut() {
            if index < s.len() {
                s[index] = value;
                return;
            }
            index -= s.len();
        }
        panic!("parameter index out of range");
    }

    /// `self += a · other`
    pub fn add_scaled(&mut self, a: f64, other: &DenoiserParams) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            axpy(a, src, dst);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self) -> Result<()> {
        let ok = self.w1.rows == HIDDEN
            && self.w1.cols == INPUT_DIM
            && self.b1.len() == HIDDEN
            && self.w2.rows == HIDDEN
            && self.w2.cols == HIDDEN
            && self.b2.len() == HIDDEN
            && self.w3.rows == LATENT_DIM
            && self.w3.cols == HIDDEN
            && self.b3.len() == LATENT_DIM
            && self.text.dim() == EMBED_DIM
            && self.text.is_consistent();
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("denoiser parameters have unexpected shapes".into()))
        }
    }

    pub fn forward(&self, z_t: &[f64], t: usize, cond: &[f64]) -> Result<ForwardCache> {
        if z_t.len() != LATENT_DIM || cond.len() != EMBED_DIM {
            return Err(Error::ShapeMismatch(format!(
                "expected latent {LATENT_DIM} and condition {EMBED_DIM}, got {} and {}",
                z_t.len(),
                cond.len()
            )));
        }
        let mut input = Vec::with_capacity(INPUT_DIM);
        input.extend_from_slice(z_t);
        input.extend_from_slice(&time_features(t));
        input.extend_from_slice(cond);

        let mut pre1 = self.b1.clone();
        let mut tmp = vec![0.0; HIDDEN];
        self.w1.matvec(&input, &mut tmp);
        axpy(1.0, &tmp, &mut pre1);
        let h1: Vec<f64> = pre1.iter().map(|&x| silu(x)).collect();

        let mut pre2 = self.b2.clone();
        self.w2.matvec(&h1, &mut tmp);
        axpy(1.0, &tmp, &mut pre2);
        let h2: Vec<f64> = pre2.iter().map(|&x| silu(x)).collect();

        let mut output = self.b3.clone();
        let mut out_tmp = vec![0.0; LATENT_DIM];
        self.w3.matvec(&h2, &mut out_tmp);
        axpy(1.0, &out_tmp, &mut output);

        Ok(ForwardCache {
            input,
            pre1,
            h1,
            pre2,
            h2,
            output,
        })
    }

    /// Accumulates `∂/∂θ` of `⟨d_output, ε_θ⟩` into `grad` (MLP weights only)
    /// and returns the gradient with respect to the conditioning vector.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grad: &mut DenoiserParams) -> Vec<f64> {
        grad.w3.add_outer(1.0, d_output, &cache.h2);
        axpy(1.0, d_output, &mut grad.b3);

        let mut d_pre2 = vec![0.0; HIDDEN];
        self.w3.matvec_t_acc(d_output, &mut d_pre2);
        for (g, &a) in d_pre2.iter_mut().zip(&cache.pre2) {
            *g *= silu_grad(a);
        }
        grad.w2.add_outer(1.0, &d_pre2, &cache.h1);
        axpy(1.0, &d_pre2, &mut grad.b2);

        let mut d_pre1 = vec![0.0; HIDDEN];
        self.w2.matvec_t_acc(&d_pre2, &mut d_pre1);
        for (g, &a) in d_pre1.iter_mut().zip(&cache.pre1) {
            *g *= silu_grad(a);
        }
        grad.w1.add_outer(1.0, &d_pre1, &cache.input);
        axpy(1.0, &d_pre1, &mut grad.b1);

        let mut d_input = vec![0.0; INPUT_DIM];
        self.w1.matvec_t_acc(&d_pre1, &mut d_input);
        d_input.split_off(LATENT_DIM + TIME_DIM)
    }
}

/// `ε_θ(z_t, t, cond)`.
pub fn denoise_predict(params: &DenoiserParams, z_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
    Ok(params.forward(z_t, t, cond)?.output)
}
