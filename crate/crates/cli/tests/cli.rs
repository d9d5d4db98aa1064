//! End-to-end checks of the `dqs` binary: determinism, exit codes, and the
//! file formats each subcommand writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dqs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dqs"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dqs-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn dqs");
    if !out.status.success() {
        eprintln!("stdout: {}", String::from_utf8_lossy(&out.stdout));
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn gen_dataset(dir: &Path, name: &str, count: usize, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let status = dqs()
        .args(["gen", "--photons", "4", "--count", &count.to_string()])
        .args(["--seed", &seed.to_string(), "--h", "sumZ"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    out
}

#[test]
fn gen_is_deterministic_and_line_counted() {
    let dir = tempdir("gen");
    let a = gen_dataset(&dir, "a.jsonl", 1000, 7);
    let b = gen_dataset(&dir, "b.jsonl", 1000, 7);
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must write identical files");
    let text = String::from_utf8(bytes_a).unwrap();
    assert_eq!(text.lines().count(), 1000);
    assert!(a.with_extension("manifest.json").exists());
    let different = gen_dataset(&dir, "c.jsonl", 1000, 8);
    assert_ne!(std::fs::read(&different).unwrap(), bytes_b);
}

#[test]
fn gen_is_thread_count_independent() {
    let dir = tempdir("gen-threads");
    let a = gen_dataset(&dir, "a.jsonl", 120, 3);
    let out_b = dir.join("b.jsonl");
    let status = dqs()
        .args(["gen", "--photons", "4", "--count", "120", "--seed", "3", "--h", "sumZ"])
        .arg("--out")
        .arg(&out_b)
        .env("DQS_THREADS", "3")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(out_b).unwrap());
}

#[test]
fn unknown_flag_exits_two() {
    let out = dqs().args(["gen", "--bogus-flag", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn golden_reports_qfis_and_known_phase_mismatches() {
    let out = run(dqs().arg("golden"));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["candidate-1", "candidate-2", "candidate-3", "train-best", "ghz-4"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
    // every QFI matches; two stated states are knowingly unreachable, so
    // the command reports a validation failure
    assert_eq!(text.matches(") ok").count(), 5, "five qfi checks pass:\n{text}");
    assert!(text.contains("fidelity 1.000000 ok"));
    assert!(text.contains("fidelity 0.250000 FAIL"));
    assert!(text.contains("fidelity 0.500000 FAIL"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sense_writes_report_and_curves() {
    let dir = tempdir("sense");
    let setup_path = dir.join("ghz8.txt");
    std::fs::write(
        &setup_path,
        "DCBell(a,b) -> DCBell(c,d) -> DCBell(e,f) -> DCBell(g,h) -> PBS(b,c) -> PBS(a,g) \
         -> QWP(h,0.5pi) -> PBS(d,f) -> PBS(c,h) -> R(d) -> PBS(e,f) -> HWP(a,0.5pi)",
    )
    .unwrap();
    let out_dir = dir.join("report");
    let out = run(dqs()
        .args(["sense", "--h", "sumZ", "--obs", "prodX", "--shots", "10000", "--seed", "1"])
        .arg("--setup-file")
        .arg(&setup_path)
        .arg("--out")
        .arg(&out_dir));
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["n_qubits"], 8);
    assert_eq!(report["degree"], 8);
    assert_eq!(report["sql"], 0.125);
    assert_eq!(report["hl"], 0.015625);
    assert_eq!(report["nodes"].as_array().unwrap().len(), 17);
    assert!(report["config_hash"].is_string());
    let sens = std::fs::read_to_string(out_dir.join("sensitivity.csv")).unwrap();
    assert!(sens.starts_with("theta,sensitivity,sql,hl"));
    assert_eq!(sens.lines().count(), 513);
    assert!(sens.lines().nth(1).unwrap().ends_with(",0.125,0.015625"));
    assert!(out_dir.join("response.csv").exists());
    assert!(out_dir.join("report.manifest.json").exists());

    // exact mode reaches the Heisenberg floor
    let exact_dir = dir.join("exact");
    let out = run(dqs()
        .args(["sense", "--h", "sumZ", "--obs", "prodX", "--exact"])
        .arg("--setup-file")
        .arg(&setup_path)
        .arg("--out")
        .arg(&exact_dir));
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(exact_dir.join("report.json")).unwrap())
            .unwrap();
    let min_sens = report["min_sensitivity"].as_f64().unwrap();
    assert!((min_sens - 1.0 / 64.0).abs() < 1e-6, "{min_sens}");
}

#[test]
fn sense_rejects_probe_without_postselection() {
    let dir = tempdir("sense-invalid");
    let setup_path = dir.join("invalid.txt");
    std::fs::write(&setup_path, "DC00(a,b) -> BS(a,b)").unwrap();
    let out = dqs()
        .args(["sense", "--h", "sumZ"])
        .arg("--setup-file")
        .arg(&setup_path)
        .arg("--out")
        .arg(dir.join("r"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn prune_strips_removable_mirror() {
    let out = run(dqs().args([
        "prune",
        "--setup",
        "DCBell(a,b) -> DCBell(c,d) -> R(b) -> PBS(b,c) -> R(c)",
        "--h",
        "sumZ",
        "--trials",
        "50",
        "--seed",
        "3",
    ]));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("unchanged: true"), "{text}");
    assert!(text.contains("PBS(b,c)"), "essential device kept:\n{text}");
}

#[test]
fn train_eval_rank_export_round_trip() {
    let dir = tempdir("train");
    let data = gen_dataset(&dir, "train.jsonl", 150, 11);
    let model_path = dir.join("model.bin");
    let out = run(dqs()
        .args(["train", "--q", "4", "--seed", "2", "--latent", "16", "--layers", "2"])
        .args(["--heads", "2", "--epochs", "3", "--batch", "32", "--lr", "2e-3"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&model_path));
    assert!(out.status.success());
    assert!(model_path.exists());
    assert!(model_path.with_extension("history.csv").exists());
    assert!(model_path.with_extension("manifest.json").exists());

    let out = run(dqs()
        .args(["eval"])
        .arg("--model")
        .arg(&model_path)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("preds.csv")));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("spearman"), "{text}");
    let preds = std::fs::read_to_string(dir.join("preds.csv")).unwrap();
    assert_eq!(preds.lines().count(), 151);

    let ranked_path = dir.join("ranked.csv");
    let out = run(dqs()
        .args(["rank", "--k", "5", "--validate", "--h", "sumZ"])
        .arg("--model")
        .arg(&model_path)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&ranked_path));
    assert!(out.status.success());
    let ranked = std::fs::read_to_string(&ranked_path).unwrap();
    assert_eq!(ranked.lines().count(), 6);
    assert!(ranked.starts_with("rank,id,predicted_qfi,oracle_qfi,setup"));

    let latent_path = dir.join("latent.csv");
    let out = run(dqs()
        .arg("export-latent")
        .arg("--model")
        .arg(&model_path)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&latent_path));
    assert!(out.status.success());
    let latent = std::fs::read_to_string(&latent_path).unwrap();
    assert_eq!(latent.lines().count(), 151);
    assert!(latent.starts_with("id,qfi_true,qfi_pred,z1,"));
    assert_eq!(latent.lines().next().unwrap().split(',').count(), 3 + 16);
}

#[test]
fn pipeline_replays_identically_per_seed() {
    let dir = tempdir("pipeline");
    let run_pipeline = |out: &Path| {
        let status = dqs()
            .args(["pipeline", "--photons", "4", "--train-count", "80", "--pool-count", "120"])
            .args(["--k", "3", "--seed", "9", "--h", "sumZ", "--obs", "prodX"])
            .args(["--shots", "2000", "--latent", "16", "--epochs", "2", "--lr", "2e-3"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run_pipeline(&dir.join("run1"));
    run_pipeline(&dir.join("run2"));
    let a = std::fs::read_to_string(dir.join("run1/summary.json")).unwrap();
    let b = std::fs::read_to_string(dir.join("run2/summary.json")).unwrap();
    assert_eq!(a, b, "seed replay must produce identical summaries");
    let summary: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert!(summary["best_oracle_qfi"].as_f64().unwrap() > 0.0);
    assert!(summary["min_sensitivity"].is_number());
    assert_eq!(summary["sql"], 0.25);
    assert_eq!(summary["hl"], 0.0625);
    assert!(summary["config_hash"].is_string());
    assert!(dir.join("run1/ranked.csv").exists());
    assert!(dir.join("run1/summary.manifest.json").exists());
}
