#![allow(dead_code)]

use aelif_lab::aelif::{AelifMode, AugmentPolicy};
use aelif_lab::diffusion::{dreambooth_loss, ldm_loss, DenoiserParams, Example, LossOutput, NoiseSchedule};
use aelif_lab::rng;
use aelif_lab::tensor::normal_vec;
use aelif_lab::text::{build_vocab, tokenize};
use aelif_lab::Result;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// `|a − n| / max(|a| + |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

/// One random gradient-check problem: parameters, a one-example instance
/// batch, a one-example prior batch, λ, augmentation policy and loss seed.
pub struct Problem {
    pub params: DenoiserParams,
    pub instance: Vec<Example>,
    pub prior: Vec<Example>,
    pub lambda: f64,
    pub policy: AugmentPolicy,
    pub seed: u64,
}

pub fn problem(draw: u64) -> Problem {
    let mut r = rng::stream_for(draw, "gradient-problem");
    let vocab = build_vocab(&["a photo of sks teapot", "a photo of a teapot"]).unwrap();
    let params = DenoiserParams::random(vocab.size(), &mut r);
    let prompts = ["a photo of sks teapot", "a poto of sks teapto", "photo of sks teapot"];
    let inst_prompt = prompts[r.random_range(0..prompts.len())];
    let example = |prompt: &str, r: &mut rng::Stream| Example {
        z0: normal_vec(8, r),
        tokens: tokenize(prompt, &vocab).unwrap(),
    };
    let instance = vec![example(inst_prompt, &mut r)];
    let prior = vec![example("a photo of a teapot", &mut r)];
    let mode = [AelifMode::None, AelifMode::Mask, AelifMode::NoiseConv][(draw % 3) as usize];
    let mut policy = AugmentPolicy::for_mode(mode);
    policy.apply_prob = 1.0;
    policy.p_max = 0.6;
    Problem {
        params,
        instance,
        prior,
        lambda: r.random_range(0.0..2.0),
        policy,
        seed: r.random(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckStats {
    pub max_rel: f64,
    pub max_abs: f64,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `loss` over every
/// parameter.
pub fn check_gradient<F>(params: &DenoiserParams, analytic: &DenoiserParams, floor: f64, loss: F) -> CheckStats
where
    F: Fn(&DenoiserParams) -> f64,
{
    let mut p = params.clone();
    let mut stats = CheckStats {
        max_rel: 0.0,
        max_abs: 0.0,
        checked: 0,
    };
    for i in 0..params.num_params() {
        let x = params.get_flat(i);
        p.set_flat(i, x + FD_STEP);
        let up = loss(&p);
        p.set_flat(i, x - FD_STEP);
        let down = loss(&p);
        p.set_flat(i, x);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic.get_flat(i);
        stats.max_rel = stats.max_rel.max(relative_error(a, numeric, floor));
        stats.max_abs = stats.max_abs.max((a - numeric).abs());
        stats.checked += 1;
    }
    stats
}

pub fn ldm(pr: &Problem, params: &DenoiserParams, schedule: &NoiseSchedule) -> Result<LossOutput> {
    ldm_loss(params, &pr.instance, schedule, &pr.policy, pr.seed)
}

pub fn dreambooth(pr: &Problem, params: &DenoiserParams, schedule: &NoiseSchedule) -> Result<LossOutput> {
    dreambooth_loss(params, &pr.instance, &pr.prior, pr.lambda, schedule, &pr.policy, pr.seed)
}
