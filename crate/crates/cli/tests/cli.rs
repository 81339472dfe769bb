use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_aelif-lab"));
    c.env("AELIF_LAB_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.json");
    std::fs::write(
        &path,
        r#"{
  "master_seed": 11,
  "categories": [{"name": "teapot", "prior_count": 40}],
  "train": {"steps": 300, "batch_size": 16, "learning_rate": 0.01, "lambda": 1.0},
  "prompts": {"kind": "fixed", "prompts": ["a photo of sks teapot", "a phto of sks teapot"]}
}"#,
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn perturb_is_seeded() {
    let a = run(&["perturb", "--prompt", "a photo of sks dog", "--seed", "4", "--count", "5"]);
    let b = run(&["perturb", "--prompt", "a photo of sks dog", "--seed", "4", "--count", "5"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"no_such_field": 1}"#).unwrap();
    let out = run(&["eval-aug", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn missing_file_exits_1() {
    let out = run(&["sample", "--checkpoint", "/nonexistent/checkpoint.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_thread_count_exits_2() {
    let out = bin()
        .env("AELIF_LAB_THREADS", "zero")
        .args(["perturb", "--prompt", "a photo of sks dog"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_sample_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("model");
    let out = run(&["train", "--config", &cfg, "--variant", "mask", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let loss = std::fs::read_to_string(out_dir.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 301);

    let ckpt = out_dir.join("checkpoint.json");
    let ckpt = ckpt.to_str().unwrap();
    let sample = |extra: &[&str]| {
        let mut args = vec!["sample", "--checkpoint", ckpt, "--seed", "3", "--count", "2"];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()
    };
    let clean = sample(&[]);
    let p0 = sample(&["--variant", "noise_conv", "--p", "0"]);
    assert_eq!(clean["samples"], p0["samples"]);
    assert_eq!(clean["samples"].as_array().unwrap().len(), 2);
    assert_eq!(clean["samples"][0]["latent"].as_array().unwrap().len(), 8);

    let o = run(&["sweep", "--checkpoint", ckpt, "--seeds", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,median_cosine"));
    assert!(lines.next().unwrap().starts_with("0,1"));
}

#[test]
fn report_round_trips_through_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = dir.path().join("first");
    let out = run(&["report", "--config", &cfg, "--out", first.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let second = dir.path().join("second");
    let input = first.join("report.json");
    let out = run(&["report", "--input", input.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.json", "augmentation.csv", "win_rates.csv", "robustness/teapot.csv"] {
        assert_eq!(
            std::fs::read(first.join(name)).unwrap(),
            std::fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}
