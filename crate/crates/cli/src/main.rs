use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aelif_lab::aelif::{AelifConfig, AelifMode};
use aelif_lab::diffusion::train::trace_csv;
use aelif_lab::diffusion::sample;
use aelif_lab::metrics::FeatureExtractor;
use aelif_lab::perturb::gen_adversarial_set;
use aelif_lab::pipeline::checkpoint::Checkpoint;
use aelif_lab::pipeline::eval::{self, train_category, Procedures};
use aelif_lab::pipeline::sweep::{noise_sweep, SweepConfig};
use aelif_lab::pipeline::{emit_report, CategorySpec, EvalReport, RunConfig};
use aelif_lab::text::tokenize;
use aelif_lab::{rng, Error};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aelif-lab", version, about = "Embedding-augmentation workbench for a toy conditional diffusion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant for one category and write a checkpoint.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Category name; defaults to the first one in the config.
        #[arg(long)]
        category: Option<String>,
        #[arg(long, default_value = "none")]
        variant: AelifMode,
    },
    /// Draw samples from a checkpoint, optionally augmenting the prompt.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the checkpoint's instance prompt.
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        aug: AugArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate typo'd variants of a prompt.
    Perturb {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Set-level distance of each variant's samples to the instance set.
    EvalAug {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Per-prompt distances under typo'd prompts and win rates.
    EvalRobust {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        ref_index: Option<usize>,
    },
    /// Run both procedures on shared models, or re-emit tables from a saved
    /// `report.json` with `--input`.
    Report {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        ref_index: Option<usize>,
        #[arg(long, conflicts_with_all = ["config", "seed", "ref_index"])]
        input: Option<PathBuf>,
    },
    /// Median cosine similarity to the clean sample as noise_conv magnitude grows.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        seeds: usize,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 100.0)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct AugArgs {
    /// Inference-time augmentation.
    #[arg(long, default_value = "none")]
    variant: AelifMode,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl AugArgs {
    fn config(&self) -> AelifConfig {
        match self.variant {
            AelifMode::None => AelifConfig::NONE,
            AelifMode::Mask => AelifConfig::mask(self.p),
            AelifMode::NoiseConv => AelifConfig::noise_conv(self.p, self.mu, self.sigma),
        }
    }
}

impl RunArgs {
    fn load(&self) -> aelif_lab::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }
}

fn write_or_print(out: Option<&Path>, contents: &str) -> aelif_lab::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            std::fs::write(path, contents).map_err(|e| io_error(path, e))
        }
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn summarize(report: &EvalReport, written: &[PathBuf]) {
    if let Some(a) = &report.augmentation {
        println!("{:<18} {:>10} {:>10} {:>10}", "item", "noise_conv", "mask", "orig");
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        for r in &a.rows {
            println!(
                "{:<18} {:>10} {:>10} {:>10.4}",
                r.item,
                cell(r.noise_conv_vs_train),
                cell(r.mask_vs_train),
                r.orig_vs_train
            );
        }
    }
    if let Some(r) = &report.robustness {
        for row in r.win_rates() {
            println!("{:<18} {:>6.2}%", row.category, row.proportion);
        }
        println!("{:<18} {:>6.2}%", "Mean", r.mean_win_best);
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> aelif_lab::Result<()> {
    match cli.command {
        Command::Train { run, category, variant } => {
            let cfg = run.load()?;
            cfg.validate()?;
            let spec = match category {
                Some(name) => cfg
                    .categories
                    .iter()
                    .find(|c| c.name == name)
                    .cloned()
                    .unwrap_or_else(|| CategorySpec::new(&name)),
                None => cfg
                    .categories
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::Config("config lists no categories".into()))?,
            };
            if variant != AelifMode::None && !cfg.augmentations.iter().any(|a| a.mode == variant) {
                return Err(Error::Config(format!("variant {variant} is not configured")));
            }
            let schedule = cfg.schedule.build()?;
            let models = train_category(&cfg, &spec, &schedule, &[variant]).map_err(|e| Error::Category {
                category: spec.name.clone(),
                source: Box::new(e),
            })?;
            let trained = &models.variants[0];
            let tc = cfg.train.to_config(eval::train_seed(&cfg, &spec), cfg.policy(variant));
            let ckpt = Checkpoint::new(tc, spec.templates(), models.vocab.clone(), &trained.params, schedule);
            std::fs::create_dir_all(&run.out).map_err(|e| io_error(&run.out, e))?;
            let ckpt_path = run.out.join("checkpoint.json");
            ckpt.save(&ckpt_path)?;
            let trace_path = run.out.join("loss.csv");
            write_or_print(Some(&trace_path), &trace_csv(&trained.trace))?;
            let s = &models.summaries()[0];
            println!(
                "{} / {}: loss {:.4} -> {:.4} over {} steps",
                s.category, s.variant, s.leading_loss, s.trailing_loss, s.steps
            );
            eprintln!("wrote {}\nwrote {}", ckpt_path.display(), trace_path.display());
        }
        Command::Sample {
            checkpoint,
            prompt,
            seed,
            count,
            aug,
            out,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let aelif = aug.config();
            aelif.validate()?;
            let prompt = prompt.unwrap_or_else(|| ckpt.templates.instance_prompt.clone());
            let tokens = tokenize(&prompt, &ckpt.vocabulary)?;
            let params = ckpt.params();
            let fe = FeatureExtractor::new();
            let root = rng::derive(seed, "cli-sample");
            let mut samples = Vec::with_capacity(count);
            for k in 0..count {
                let z = sample(&params, &tokens, &ckpt.schedule, &mut rng::stream(rng::derive_index(root, k as u64)), &aelif)?;
                let features = fe.extract(z.as_slice())?;
                samples.push(serde_json::json!({ "latent": z, "features": features }));
            }
            let doc = serde_json::json!({ "prompt": prompt, "aelif": aelif, "samples": samples });
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&doc).expect("json"))?;
        }
        Command::Perturb {
            prompt,
            config,
            seed,
            count,
            out,
        } => {
            let mut pc = match config {
                Some(path) => RunConfig::load(&path)?.perturb,
                None => Default::default(),
            };
            if let Some(s) = seed {
                pc.seed = s;
            }
            if let Some(c) = count {
                pc.count = c;
            }
            let prompts = gen_adversarial_set(&prompt, &pc, &mut rng::stream(pc.seed))?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&prompts).expect("json"))?;
        }
        Command::EvalAug { run } => {
            let cfg = run.load()?;
            let report = eval::run_eval(&cfg, Procedures { augmentation: true, robustness: false })?;
            let written = emit_report(&report, &run.out)?;
            summarize(&report, &written);
        }
        Command::EvalRobust { run, ref_index } => {
            let mut cfg = run.load()?;
            if let Some(i) = ref_index {
                cfg.ref_index = i;
            }
            let report = eval::run_eval(&cfg, Procedures { augmentation: false, robustness: true })?;
            let written = emit_report(&report, &run.out)?;
            summarize(&report, &written);
        }
        Command::Report { run, ref_index, input } => {
            let report = match input {
                Some(path) => EvalReport::load(&path)?,
                None => {
                    let mut cfg = run.load()?;
                    if let Some(i) = ref_index {
                        cfg.ref_index = i;
                    }
                    eval::run_full_eval(&cfg)?
                }
            };
            let written = emit_report(&report, &run.out)?;
            summarize(&report, &written);
        }
        Command::Sweep {
            checkpoint,
            prompt,
            seed,
            seeds,
            mu,
            sigma,
            out,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let prompt = prompt.unwrap_or_else(|| ckpt.templates.instance_prompt.clone());
            let tokens = tokenize(&prompt, &ckpt.vocabulary)?;
            let cfg = SweepConfig {
                seeds,
                mu,
                sigma,
                seed,
                ..Default::default()
            };
            let result = noise_sweep(&ckpt.params(), &tokens, &ckpt.schedule, &cfg)?;
            write_or_print(out.as_deref(), &result.to_csv())?;
            eprintln!("spearman rho = {:.4}", result.spearman);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        3
    } else if matches!(e.root(), Error::Io { .. }) {
        1
    } else {
        2
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("AELIF_LAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("AELIF_LAB_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
