use rand::Rng;

use crate::aelif::{augment, AelifConfig};
use crate::diffusion::denoiser::{DenoiserParams, LATENT_DIM};
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::LatentPoint;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::normal_vec;
use crate::text::{encode, TokenSequence};

/// Pooled conditioning vector for `tokens`, after the inference-time augmentation.
pub fn condition(
    params: &DenoiserParams,
    tokens: &TokenSequence,
    aelif: &AelifConfig,
    aug_seed: u64,
) -> Result<Vec<f64>> {
    let embeddings = encode(tokens, &params.text)?;
    let augmented = augment(&embeddings, aelif, &mut rng::stream(aug_seed))?;
    Ok(augmented.mean())
}

/// DDPM ancestral sampling from `z_T ∼ N(0, I)` down to `z_0`.
///
/// The first draw from `rng` seeds the augmentation, so the latent noise path
/// is the same whatever `aelif_at_inference` says.
pub fn sample<R: Rng + ?Sized>(
    params: &DenoiserParams,
    tokens: &TokenSequence,
    schedule: &NoiseSchedule,
    rng: &mut R,
    aelif_at_inference: &AelifConfig,
) -> Result<LatentPoint> {
    params.check_shapes()?;
    let aug_seed: u64 = rng.random();
    let cond = condition(params, tokens, aelif_at_inference, aug_seed)?;
    let mut z = normal_vec(LATENT_DIM, rng);
    for t in (0..schedule.steps()).rev() {
        let eps_hat = params.forward(&z, t, &cond)?.output;
        let beta = schedule.beta(t);
        let ab = schedule.alpha_bar(t);
        let coef = beta / (1.0 - ab).sqrt();
        let inv_sqrt_alpha = 1.0 / (1.0 - beta).sqrt();
        for (zi, ei) in z.iter_mut().zip(&eps_hat) {
            *zi = inv_sqrt_alpha * (*zi - coef * ei);
        }
        if t > 0 {
            let var = beta * (1.0 - schedule.alpha_bar(t - 1)) / (1.0 - ab);
            let sd = var.sqrt();
            for zi in z.iter_mut() {
                *zi += sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample"));
    }
    Ok(LatentPoint(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aelif::AelifMode;
    use crate::diffusion::make_schedule;
    use crate::text::{build_vocab, tokenize};

    fn tokens() -> (usize, TokenSequence) {
        let v = build_vocab(&["a photo of sks dog"]).unwrap();
        (v.size(), tokenize("a photo of sks dog", &v).unwrap())
    }

    #[test]
    fn single_step_zero_network_closed_form() {
        let (size, toks) = tokens();
        let params = DenoiserParams::zeros(size);
        let schedule = make_schedule(1, 0.3, 0.3).unwrap();
        let out = sample(&params, &toks, &schedule, &mut rng::stream(9), &AelifConfig::NONE).unwrap();
        let mut r = rng::stream(9);
        let _aug: u64 = r.random();
        let z1 = normal_vec(LATENT_DIM, &mut r);
        for (a, b) in out.0.iter().zip(&z1) {
            assert!((a - b / 0.7f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let (size, toks) = tokens();
        let params = DenoiserParams::random(size, &mut rng::stream(2));
        let schedule = NoiseSchedule::default();
        let a = sample(&params, &toks, &schedule, &mut rng::stream(5), &AelifConfig::NONE).unwrap();
        let b = sample(&params, &toks, &schedule, &mut rng::stream(5), &AelifConfig::NONE).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_magnitude_matches_no_augmentation() {
        let (size, toks) = tokens();
        let params = DenoiserParams::random(size, &mut rng::stream(2));
        let schedule = NoiseSchedule::default();
        let none = sample(&params, &toks, &schedule, &mut rng::stream(5), &AelifConfig::NONE).unwrap();
        for cfg in [AelifConfig::mask(0.0), AelifConfig::noise_conv(0.0, 0.0, 100.0)] {
            let out = sample(&params, &toks, &schedule, &mut rng::stream(5), &cfg).unwrap();
            let bits = |p: &LatentPoint| p.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&none), bits(&out), "{:?}", cfg.mode);
        }
        let masked = sample(&params, &toks, &schedule, &mut rng::stream(5), &AelifConfig::mask(1.0)).unwrap();
        assert_ne!(masked, none);
        assert_eq!(AelifConfig::mask(1.0).mode, AelifMode::Mask);
    }
}
