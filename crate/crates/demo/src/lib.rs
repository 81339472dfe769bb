//! Browser bindings. Every export takes plain scalars and returns a JSON
//! string; failures come back as `{"error": "..."}` so the page can show them.

use aelif_lab::aelif::{augment, AelifConfig, AelifMode};
use aelif_lab::perturb::{gen_adversarial_set, levenshtein, PerturbConfig};
use aelif_lab::pipeline::eval::train_category;
use aelif_lab::pipeline::sweep::{noise_sweep as run_sweep, SweepConfig};
use aelif_lab::pipeline::{CategorySpec, RunConfig, CATEGORIES};
use aelif_lab::rng;
use aelif_lab::text::{build_vocab, encode, tokenize, TextEncoderParams, Vocabulary, EMBED_DIM};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

const ENCODER_SEED: u64 = 7;

fn respond<T: Serialize>(result: aelif_lab::Result<T>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).expect("serializable"),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Vocabulary of every category's instance and class prompts.
fn demo_vocab() -> aelif_lab::Result<Vocabulary> {
    let corpus: Vec<String> = CATEGORIES
        .iter()
        .flat_map(|c| {
            let t = CategorySpec::new(c).templates();
            [t.instance_prompt, t.prior_prompt]
        })
        .collect();
    build_vocab(&corpus)
}

#[derive(Serialize)]
struct Augmented {
    tokens: Vec<String>,
    positions: Vec<usize>,
    before: Vec<Vec<f64>>,
    after: Vec<Vec<f64>>,
}

/// Tokenizes and encodes `prompt`, then applies one AELIF draw.
/// `mode` is `none`, `mask` or `noise_conv`.
#[wasm_bindgen]
pub fn augment_sequence(prompt: &str, mode: &str, p: f64, mu: f64, sigma: f64, seed: u64) -> String {
    respond((|| {
        let mode: AelifMode = mode.parse()?;
        let cfg = match mode {
            AelifMode::None => AelifConfig::NONE,
            AelifMode::Mask => AelifConfig::mask(p),
            AelifMode::NoiseConv => AelifConfig::noise_conv(p, mu, sigma),
        };
        let vocab = demo_vocab()?;
        let tokens = tokenize(prompt, &vocab)?;
        let encoder = TextEncoderParams::random(vocab.size(), EMBED_DIM, &mut rng::stream(ENCODER_SEED));
        let before = encode(&tokens, &encoder)?;
        let after = augment(&before, &cfg, &mut rng::stream(seed))?;
        let rows = |s: &aelif_lab::text::EmbeddingSequence| s.iter().map(<[f64]>::to_vec).collect::<Vec<_>>();
        let (b, a) = (rows(&before), rows(&after));
        Ok(Augmented {
            tokens: tokens.ids().iter().map(|&id| vocab.label(id)).collect(),
            positions: (0..b.len()).filter(|&i| a[i] != b[i]).collect(),
            before: b,
            after: a,
        })
    })())
}

#[derive(Serialize)]
struct Typo {
    prompt: String,
    distance: usize,
    tokens: usize,
}

/// `count` typo'd variants of `template` ("a photo of sks <item>").
#[wasm_bindgen]
pub fn typo_set(template: &str, count: usize, max_edits: usize, seed: u64) -> String {
    respond((|| {
        let cfg = PerturbConfig {
            count,
            max_edits,
            seed,
            ..Default::default()
        };
        let vocab = demo_vocab()?;
        gen_adversarial_set(template, &cfg, &mut rng::stream(seed))?
            .into_iter()
            .map(|p| {
                Ok(Typo {
                    distance: levenshtein(template, &p),
                    tokens: tokenize(&p, &vocab)?.len(),
                    prompt: p,
                })
            })
            .collect::<aelif_lab::Result<Vec<_>>>()
    })())
}

/// Trains a baseline model for `category` for `steps` SGD steps, then sweeps
/// inference-time noise_conv over p = 0, 0.1, …, 0.9.
#[wasm_bindgen]
pub fn noise_sweep(category: &str, steps: usize, sigma: f64, seeds: usize, seed: u64) -> String {
    respond((|| {
        let mut cfg = RunConfig {
            master_seed: seed,
            ..RunConfig::default()
        };
        cfg.train.steps = steps;
        let spec = CategorySpec::new(category);
        let schedule = cfg.schedule.build()?;
        let models = train_category(&cfg, &spec, &schedule, &[AelifMode::None])?;
        let v = &models.variants[0];
        let sweep_cfg = SweepConfig {
            sigma,
            seeds,
            seed,
            ..Default::default()
        };
        let result = run_sweep(&v.params, &models.instance_tokens, &schedule, &sweep_cfg)?;
        let stride = (v.trace.len() / 200).max(1);
        let trace: Vec<f64> = v.trace.chunks(stride).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        Ok(json!({
            "prompt": spec.templates().instance_prompt,
            "grid": result.grid,
            "median": result.median,
            "cosine": result.cosine,
            "spearman": result.spearman,
            "loss": trace,
        }))
    })())
}
