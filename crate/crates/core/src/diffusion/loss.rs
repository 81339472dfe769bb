//! Noise-prediction losses with analytic gradients.
//!
//! Each example `i` in a batch draws its timestep and noise from the stream
//! `derive_index(derive(seed, "noise"), i)` and its embedding augmentation
//! from `derive_index(derive(seed, "aelif"), i)`. Two batches evaluated with
//! the same seed therefore see the same `(t, ε)` per index, and changing the
//! augmentation policy never changes the diffusion noise.

use rand::Rng;

use crate::aelif::{Augmentation, AugmentPolicy};
use crate::diffusion::denoiser::{DenoiserParams, LATENT_DIM};
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::forward_noise;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{axpy, normal_vec};
use crate::text::{encode, EmbeddingSequence, TextEncoderParams, TokenSequence};

/// One training pair: a clean latent and its tokenized prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub z0: Vec<f64>,
    pub tokens: TokenSequence,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: DenoiserParams,
}

/// Anything that predicts the added noise; lets the loss be evaluated for
/// reference predictors as well as for [`DenoiserParams`].
pub trait NoisePredictor {
    fn predict(&self, z_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>>;
}

impl NoisePredictor for DenoiserParams {
    fn predict(&self, z_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(z_t, t, cond)?.output)
    }
}

/// The random quantities one example consumes.
#[derive(Debug, Clone)]
pub struct ExampleDraw {
    pub t: usize,
    pub eps: Vec<f64>,
    pub augmentation: Augmentation,
}

pub fn draw_example(
    seed: u64,
    index: usize,
    seq_len: usize,
    embed_dim: usize,
    schedule: &NoiseSchedule,
    policy: &AugmentPolicy,
) -> Result<ExampleDraw> {
    let mut noise = rng::stream(rng::derive_index(rng::derive(seed, "noise"), index as u64));
    let t = noise.random_range(0..schedule.steps());
    let eps = normal_vec(LATENT_DIM, &mut noise);
    let mut aug_rng = rng::stream(rng::derive_index(rng::derive(seed, "aelif"), index as u64));
    let augmentation = policy.draw(seq_len, embed_dim, &mut aug_rng)?;
    Ok(ExampleDraw { t, eps, augmentation })
}

struct Prepared {
    draw: ExampleDraw,
    z_t: Vec<f64>,
    cond: Vec<f64>,
}

fn prepare(
    example: &Example,
    index: usize,
    text: &TextEncoderParams,
    schedule: &NoiseSchedule,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<Prepared> {
    if example.z0.len() != LATENT_DIM {
        return Err(Error::ShapeMismatch(format!(
            "latent has {} dims, expected {LATENT_DIM}",
            example.z0.len()
        )));
    }
    let embeddings: EmbeddingSequence = encode(&example.tokens, text)?;
    let draw = draw_example(seed, index, embeddings.len(), embeddings.dim(), schedule, policy)?;
    let cond = draw.augmentation.apply(&embeddings)?.mean();
    let z_t = forward_noise(&example.z0, draw.t, &draw.eps, schedule)?;
    Ok(Prepared { draw, z_t, cond })
}

/// Loss value only, for an arbitrary predictor.
pub fn ldm_loss_value<M: NoisePredictor + ?Sized>(
    model: &M,
    text: &TextEncoderParams,
    batch: &[Example],
    schedule: &NoiseSchedule,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let prep = prepare(ex, i, text, schedule, policy, seed)?;
        let pred = model.predict(&prep.z_t, prep.draw.t, &prep.cond)?;
        total += squared_error(&prep.draw.eps, &pred);
    }
    Ok(total / batch.len() as f64)
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `mean_i ‖ε_i − ε_θ(z_t, t, c_i)‖²` and its gradient with respect to every
/// denoiser and text-encoder parameter.
pub fn ldm_loss(
    params: &DenoiserParams,
    batch: &[Example],
    schedule: &NoiseSchedule,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    for (i, ex) in batch.iter().enumerate() {
        let prep = prepare(ex, i, &params.text, schedule, policy, seed)?;
        let cache = params.forward(&prep.z_t, prep.draw.t, &prep.cond)?;
        total += squared_error(&prep.draw.eps, &cache.output);

        let d_out: Vec<f64> = cache
            .output
            .iter()
            .zip(&prep.draw.eps)
            .map(|(p, e)| 2.0 * scale * (p - e))
            .collect();
        let d_cond = params.backward(&cache, &d_out, &mut grad);

        // cond = (1/L) Σ_i aug_i(E[tok_i] + P[i])
        let len = ex.tokens.len();
        let inv_len = 1.0 / len as f64;
        for (pos, &id) in ex.tokens.ids().iter().enumerate() {
            let mut g: Vec<f64> = d_cond.iter().map(|d| d * inv_len).collect();
            prep.draw.augmentation.backprop(pos, &mut g);
            axpy(1.0, &g, grad.text.embedding_table.row_mut(id));
            axpy(1.0, &g, grad.text.positional_table.row_mut(pos));
        }
    }
    Ok(LossOutput {
        loss: total * scale,
        grad,
    })
}

/// Instance term plus `λ` times the prior-preservation term. Both terms use
/// the same seed, so identical batches share their `(t, ε)` draws.
pub fn dreambooth_loss(
    params: &DenoiserParams,
    instance: &[Example],
    prior: &[Example],
    lambda: f64,
    schedule: &NoiseSchedule,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<LossOutput> {
    if instance.is_empty() || prior.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut out = ldm_loss(params, instance, schedule, policy, seed)?;
    if lambda != 0.0 {
        let prior_out = ldm_loss(params, prior, schedule, policy, seed)?;
        out.loss += lambda * prior_out.loss;
        out.grad.add_scaled(lambda, &prior_out.grad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aelif::AelifMode;
    use crate::diffusion::denoiser::DenoiserParams;
    use crate::text::{build_vocab, tokenize, Vocabulary};

    fn setup() -> (Vocabulary, DenoiserParams, NoiseSchedule) {
        let vocab = build_vocab(&["a photo of sks dog", "a photo of a dog"]).unwrap();
        let params = DenoiserParams::random(vocab.size(), &mut rng::stream(31));
        (vocab, params, NoiseSchedule::default())
    }

    fn example(vocab: &Vocabulary, prompt: &str, seed: u64) -> Example {
        Example {
            z0: normal_vec(LATENT_DIM, &mut rng::stream(seed)),
            tokens: tokenize(prompt, vocab).unwrap(),
        }
    }

    /// Predicts exactly the noise that produced `z_t` from a known `z0`.
    struct Oracle<'a> {
        z0: &'a [f64],
        schedule: &'a NoiseSchedule,
    }

    impl NoisePredictor for Oracle<'_> {
        fn predict(&self, z_t: &[f64], t: usize, _cond: &[f64]) -> Result<Vec<f64>> {
            let ab = self.schedule.alpha_bar(t);
            Ok(z_t
                .iter()
                .zip(self.z0)
                .map(|(z, x)| (z - ab.sqrt() * x) / (1.0 - ab).sqrt())
                .collect())
        }
    }

    struct Zero;

    impl NoisePredictor for Zero {
        fn predict(&self, _z_t: &[f64], _t: usize, _cond: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0; LATENT_DIM])
        }
    }

    #[test]
    fn perfect_predictor_has_zero_loss() {
        let (vocab, params, schedule) = setup();
        let ex = example(&vocab, "a photo of sks dog", 1);
        let oracle = Oracle {
            z0: &ex.z0,
            schedule: &schedule,
        };
        let loss = ldm_loss_value(&oracle, &params.text, std::slice::from_ref(&ex), &schedule, &AugmentPolicy::NONE, 5).unwrap();
        assert!(loss < 1e-20, "{loss}");
    }

    #[test]
    fn zero_predictor_loss_is_latent_dim() {
        let (vocab, params, schedule) = setup();
        let batch: Vec<Example> = (0..10_000).map(|i| example(&vocab, "a photo of sks dog", i)).collect();
        let loss = ldm_loss_value(&Zero, &params.text, &batch, &schedule, &AugmentPolicy::NONE, 9).unwrap();
        assert!((loss / LATENT_DIM as f64 - 1.0).abs() < 0.05, "{loss}");
    }

    #[test]
    fn value_and_gradient_paths_agree() {
        let (vocab, params, schedule) = setup();
        let batch: Vec<Example> = (0..6).map(|i| example(&vocab, "a poto of sks dog", i)).collect();
        let policy = AugmentPolicy::noise_conv();
        let a = ldm_loss(&params, &batch, &schedule, &policy, 3).unwrap().loss;
        let b = ldm_loss_value(&params, &params.text, &batch, &schedule, &policy, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_batches_rejected() {
        let (vocab, params, schedule) = setup();
        let ex = example(&vocab, "a photo of sks dog", 1);
        assert!(matches!(
            ldm_loss(&params, &[], &schedule, &AugmentPolicy::NONE, 0),
            Err(Error::EmptyBatch)
        ));
        assert!(matches!(
            dreambooth_loss(&params, &[ex], &[], 1.0, &schedule, &AugmentPolicy::NONE, 0),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn lambda_zero_reduces_to_instance_term() {
        let (vocab, params, schedule) = setup();
        let inst: Vec<Example> = (0..4).map(|i| example(&vocab, "a photo of sks dog", i)).collect();
        let prior: Vec<Example> = (10..14).map(|i| example(&vocab, "a photo of a dog", i)).collect();
        let policy = AugmentPolicy::mask();
        let db = dreambooth_loss(&params, &inst, &prior, 0.0, &schedule, &policy, 77).unwrap();
        let ldm = ldm_loss(&params, &inst, &schedule, &policy, 77).unwrap();
        assert_eq!(db.loss.to_bits(), ldm.loss.to_bits());
        assert_eq!(db.grad, ldm.grad);
    }

    #[test]
    fn identical_terms_double() {
        let (vocab, params, schedule) = setup();
        let inst: Vec<Example> = (0..4).map(|i| example(&vocab, "a photo of sks dog", i)).collect();
        let policy = AugmentPolicy::NONE;
        let db = dreambooth_loss(&params, &inst, &inst, 1.0, &schedule, &policy, 4).unwrap();
        let single = ldm_loss(&params, &inst, &schedule, &policy, 4).unwrap();
        assert_eq!(db.loss, 2.0 * single.loss);
    }

    #[test]
    fn augmentation_policy_does_not_shift_noise() {
        let schedule = NoiseSchedule::default();
        let a = draw_example(3, 2, 5, 16, &schedule, &AugmentPolicy::NONE).unwrap();
        let b = draw_example(3, 2, 5, 16, &schedule, &AugmentPolicy::mask()).unwrap();
        assert_eq!((a.t, &a.eps), (b.t, &b.eps));
        let c = AugmentPolicy {
            mode: AelifMode::Mask,
            p_max: 1.0,
            mu: 0.0,
            sigma: 0.0,
            apply_prob: 1.0,
        };
        let d = draw_example(3, 2, 5, 16, &schedule, &c).unwrap();
        assert_eq!(d.eps, a.eps);
    }
}
