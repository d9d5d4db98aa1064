//! Implementations behind the subcommands. Each returns `Ok(true)` on
//! success and `Ok(false)` for a validation failure (exit code 1).

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::json;

use dqs_core::dataset::{
    generate_labeled, label_setup, read_jsonl_file, write_jsonl_file, LabeledSetup, ToolboxConfig,
};
use dqs_core::graph::{encode_setup, SetupGraph};
use dqs_core::optics::{postselect, run_setup, OpticalSetup};
use dqs_core::search::{
    default_prune_trials, prune_setup, rank_candidates, validate, write_ranked_csv,
};
use dqs_core::sensing::{
    run_sensing, HamiltonianKind, ObservableKind, PauliChannel, Shots,
};
use dqs_core::surrogate::{
    spearman, train, Mode, ModelConfig, SurrogateModel, TrainConfig,
};
use rand_chacha::ChaCha8Rng;

use crate::manifest::Manifest;
use crate::ToolboxArgs;

fn effective_threads(flag: usize) -> usize {
    std::env::var("DQS_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(flag)
        .max(1)
}

fn toolbox_from(args: &ToolboxArgs) -> ToolboxConfig {
    ToolboxConfig::new(args.photons).with_grid(args.q).with_lengths(args.lmin, args.lmax)
}

fn hamiltonian_kind(tag: &str) -> Result<HamiltonianKind> {
    Ok(HamiltonianKind::from_tag(tag)?)
}

pub fn gen(
    toolbox_args: ToolboxArgs,
    count: usize,
    seed: u64,
    h_tag: &str,
    threads: usize,
    out: &Path,
) -> Result<bool> {
    let toolbox = toolbox_from(&toolbox_args);
    let kind = hamiltonian_kind(h_tag)?;
    let h = kind.build(toolbox.n_photons);
    let threads = effective_threads(threads);
    let started = Instant::now();
    let (records, duplicates) = generate_labeled(&toolbox, &h, h_tag, count, seed, threads)?;
    write_jsonl_file(out, &records)?;
    let valid = records.iter().filter(|r| r.valid).count();
    println!(
        "wrote {} records to {} ({} valid, {} duplicate draws discarded, {:.2?})",
        records.len(),
        out.display(),
        valid,
        duplicates,
        started.elapsed()
    );
    let mut manifest = Manifest::new(
        "gen",
        json!({
            "photons": toolbox.n_photons, "q": toolbox.grid_q,
            "lmin": toolbox.l_min, "lmax": toolbox.l_max,
            "count": count, "h": h_tag, "threads": threads,
            "duplicates_discarded": duplicates,
        }),
        seed,
    );
    manifest.record(out)?;
    manifest.write_next_to(out)?;
    Ok(true)
}

fn load_graph_dataset(
    path: &Path,
    q: u32,
) -> Result<(Vec<LabeledSetup>, Vec<(SetupGraph, f64)>, ToolboxConfig, usize)> {
    let records = read_jsonl_file(path).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        bail!("dataset {} is empty", path.display());
    }
    let n = records[0].setup.n_photons;
    let toolbox = ToolboxConfig::new(n).with_grid(q).with_lengths(0, usize::MAX);
    let data = records
        .iter()
        .map(|r| Ok((encode_setup(&r.setup, &toolbox)?, r.qfi)))
        .collect::<Result<Vec<_>>>()?;
    Ok((records, data, toolbox, n))
}

/// Work out the wave-plate grid a model was trained with from its feature
/// width: `d = (8 + 2q) + n`.
fn grid_from_model(feature_dim: usize, n_photons: usize) -> Result<u32> {
    let d1 = feature_dim
        .checked_sub(n_photons)
        .filter(|d1| *d1 >= 8 && (d1 - 8) % 2 == 0)
        .with_context(|| {
            format!("model feature dim {feature_dim} incompatible with {n_photons} photons")
        })?;
    Ok(((d1 - 8) / 2) as u32)
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub q: u32,
    pub seed: u64,
    pub latent: usize,
    pub layers: usize,
    pub heads: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub wd: f64,
    pub val_frac: f64,
    pub reference_recipe: bool,
}

pub fn train_cmd(args: TrainArgs) -> Result<bool> {
    let (_, data, _, n) = load_graph_dataset(&args.data, args.q)?;
    let feature_dim = data[0].0.feature_dim();
    let label_scale = (n * n) as f64;
    let config = ModelConfig {
        latent: args.latent,
        layers: args.layers,
        heads: args.heads,
        feature_dim,
        bn_momentum: 0.1,
        bn_eps: 1e-5,
        label_scale,
    };
    let mut cfg = if args.reference_recipe {
        TrainConfig::reference(args.seed)
    } else {
        TrainConfig {
            learning_rate: args.lr,
            weight_decay: args.wd,
            epochs: args.epochs,
            batch_size: args.batch,
            ..TrainConfig::desk(args.seed)
        }
    };
    cfg.val_fraction = args.val_frac;
    let mut model = SurrogateModel::<f64>::new(config, args.seed)?;
    let started = Instant::now();
    let history = train(&mut model, &data, &cfg)?;
    model.save_file(&args.out)?;
    let history_path = args.out.with_extension("history.csv");
    {
        use std::io::Write;
        let mut file = std::fs::File::create(&history_path)?;
        writeln!(file, "epoch,train_mse,val_mse,val_spearman")?;
        for stats in &history {
            writeln!(
                file,
                "{},{},{},{}",
                stats.epoch,
                stats.train_mse,
                stats.val_mse.map(|v| v.to_string()).unwrap_or_default(),
                stats.val_spearman.map(|v| v.to_string()).unwrap_or_default()
            )?;
        }
    }
    let last = history.last().expect("at least one epoch");
    println!(
        "trained {} epochs in {:.2?}: train mse {:.6}{}",
        history.len(),
        started.elapsed(),
        last.train_mse,
        last.val_spearman.map(|r| format!(", val spearman {r:.4}")).unwrap_or_default()
    );
    let mut manifest = Manifest::new(
        "train",
        json!({
            "data": args.data.display().to_string(), "q": args.q,
            "latent": args.latent, "layers": args.layers, "heads": args.heads,
            "epochs": cfg.epochs, "batch": cfg.batch_size,
            "lr": cfg.learning_rate, "wd": cfg.weight_decay,
            "val_frac": cfg.val_fraction, "reference_recipe": args.reference_recipe,
            "label_scale": label_scale,
        }),
        args.seed,
    );
    manifest.record(&args.out)?;
    manifest.record(&history_path)?;
    manifest.write_next_to(&args.out)?;
    Ok(true)
}

fn load_model_for(data_path: &Path, model_path: &Path) -> Result<(SurrogateModel<f64>, Vec<LabeledSetup>, Vec<(SetupGraph, f64)>, ToolboxConfig)> {
    let model = SurrogateModel::<f64>::load_file(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let records = read_jsonl_file(data_path)?;
    if records.is_empty() {
        bail!("dataset {} is empty", data_path.display());
    }
    let n = records[0].setup.n_photons;
    let q = grid_from_model(model.config.feature_dim, n)?;
    let toolbox = ToolboxConfig::new(n).with_grid(q).with_lengths(0, usize::MAX);
    let data = records
        .iter()
        .map(|r| Ok((encode_setup(&r.setup, &toolbox)?, r.qfi)))
        .collect::<Result<Vec<_>>>()?;
    Ok((model, records, data, toolbox))
}

pub fn eval_cmd(model_path: &Path, data_path: &Path, out: Option<&Path>) -> Result<bool> {
    let (model, records, data, _) = load_model_for(data_path, model_path)?;
    let graphs: Vec<&SetupGraph> = data.iter().map(|(g, _)| g).collect();
    let preds = model.predict_qfi_batch(&graphs)?;
    let labels: Vec<f64> = data.iter().map(|(_, y)| *y).collect();
    let scale = model.config.label_scale;
    let mse = preds
        .iter()
        .zip(&labels)
        .map(|(p, y)| ((p - y) / scale).powi(2))
        .sum::<f64>()
        / preds.len() as f64;
    let rho = spearman(&preds, &labels)?;
    println!("{} records: scaled mse {mse:.6}, spearman {rho:.4}", preds.len());
    if let Some(path) = out {
        use std::io::Write;
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "id,qfi_true,qfi_pred")?;
        for (record, pred) in records.iter().zip(&preds) {
            writeln!(file, "{},{},{}", record.id, record.qfi, pred)?;
        }
    }
    Ok(true)
}

pub fn rank_cmd(
    model_path: &Path,
    data_path: &Path,
    k: usize,
    do_validate: bool,
    h_tag: &str,
    out: &Path,
) -> Result<bool> {
    let (model, records, _, toolbox) = load_model_for(data_path, model_path)?;
    let pool: Vec<(u64, OpticalSetup)> =
        records.iter().map(|r| (r.id, r.setup.clone())).collect();
    let mut ranked = rank_candidates(&model, &pool, &toolbox, k)?;
    if do_validate {
        let kind = hamiltonian_kind(h_tag)?;
        let h = kind.build(toolbox.n_photons);
        validate(&mut ranked, &h)?;
    }
    let file = std::fs::File::create(out)?;
    write_ranked_csv(&ranked, std::io::BufWriter::new(file))?;
    println!(
        "ranked {} candidates from {} setups ({} duplicate keys) -> {}",
        ranked.entries.len(),
        pool.len(),
        ranked.duplicate_count,
        out.display()
    );
    for (i, entry) in ranked.entries.iter().enumerate() {
        println!(
            "  #{}: id {} predicted {:.3}{}",
            i + 1,
            entry.id,
            entry.predicted_qfi,
            entry.oracle_qfi.map(|o| format!(" oracle {o:.3}")).unwrap_or_default()
        );
    }
    let mut manifest = Manifest::new(
        "rank",
        json!({
            "model": model_path.display().to_string(),
            "data": data_path.display().to_string(),
            "k": k, "validate": do_validate, "h": h_tag,
            "duplicate_keys": ranked.duplicate_count,
        }),
        0,
    );
    manifest.record(out)?;
    manifest.write_next_to(out)?;
    Ok(true)
}

pub fn prune_cmd(
    setup_text: Option<String>,
    setup_file: Option<PathBuf>,
    h_tag: &str,
    trials: Option<usize>,
    seed: u64,
) -> Result<bool> {
    let text = match (setup_text, setup_file) {
        (Some(t), None) => t,
        (None, Some(path)) => std::fs::read_to_string(path)?,
        _ => bail!("provide exactly one of --setup or --setup-file"),
    };
    let setup = OpticalSetup::parse(text.trim())?;
    let kind = hamiltonian_kind(h_tag)?;
    let h = kind.build(setup.n_photons);
    let before = label_setup(0, &setup, &h)?;
    let trials = trials.unwrap_or_else(|| default_prune_trials(&setup));
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pruned = prune_setup(&setup, &h, trials, &mut rng)?;
    let after = label_setup(0, &pruned, &h)?;
    println!("qfi {} (unchanged: {})", after.qfi, (after.qfi - before.qfi).abs() <= 1e-9);
    println!("devices {} -> {}", setup.device_count(), pruned.device_count());
    println!("{}", pruned.text());
    Ok(true)
}

pub struct SenseArgs {
    pub setup_file: PathBuf,
    pub hamiltonian: String,
    pub obs: String,
    pub shots: u64,
    pub exact: bool,
    pub degree: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn sense_cmd(args: SenseArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&args.setup_file)?;
    let setup = OpticalSetup::parse(text.trim())?;
    let n = setup.n_photons;
    let probe = postselect(&run_setup::<f64>(&setup)?);
    if probe.success_prob() <= 0.0 {
        println!("setup post-selects to nothing; no probe to sense with");
        return Ok(false);
    }
    let kind = hamiltonian_kind(&args.hamiltonian)?;
    let obs_kind = ObservableKind::from_tag(&args.obs)?;
    let degree = args.degree.unwrap_or_else(|| kind.default_degree(n));
    // the channel captures the Hamiltonian; the estimator below only ever
    // sees the black-box trait object
    let channel = PauliChannel::new(probe, kind.build(n), obs_kind.build(n));
    let shots = if args.exact { Shots::Infinite } else { Shots::Finite(args.shots) };
    let report = run_sensing(&channel, n, degree, shots, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let report_path = args.out.join("report.json");
    let mut report_json: serde_json::Value = serde_json::from_str(&report.to_json()?)?;
    let config = json!({
        "setup": setup.text(), "h": args.hamiltonian, "obs": args.obs,
        "shots": args.shots, "exact": args.exact, "degree": degree,
    });
    let mut manifest = Manifest::new("sense", config, args.seed);
    report_json["config_hash"] = json!(manifest.config_hash);
    std::fs::write(&report_path, serde_json::to_string_pretty(&report_json)?)?;
    let sens_path = args.out.join("sensitivity.csv");
    report.write_sensitivity_csv(std::fs::File::create(&sens_path)?)?;
    let resp_path = args.out.join("response.csv");
    report.write_response_csv(std::fs::File::create(&resp_path)?)?;
    println!(
        "degree {} fit from {} nodes; sql {:.6}, hl {:.6}",
        report.degree,
        report.nodes.len(),
        report.sql,
        report.hl
    );
    match report.min_sensitivity {
        Some(min) => println!("min sensitivity {min:.6}"),
        None => println!("response is flat: sensitivity diverges everywhere"),
    }
    if let Some(err) = report.mean_abs_error {
        println!("mean |fit - exact| over the grid: {err:.6}");
    }
    for path in [&report_path, &sens_path, &resp_path] {
        manifest.record(path)?;
    }
    manifest.write_next_to(&report_path)?;
    Ok(true)
}

pub fn export_latent_cmd(model_path: &Path, data_path: &Path, out: &Path) -> Result<bool> {
    let (model, records, data, _) = load_model_for(data_path, model_path)?;
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    let latent = model.config.latent;
    let header: Vec<String> = (1..=latent).map(|i| format!("z{i}")).collect();
    writeln!(file, "id,qfi_true,qfi_pred,{}", header.join(","))?;
    let scale = model.config.label_scale;
    for (record, (graph, _)) in records.iter().zip(&data) {
        let (pred, z) = model.forward(graph, Mode::Eval)?;
        let row: Vec<String> = z.iter().map(|v| v.to_string()).collect();
        writeln!(file, "{},{},{},{}", record.id, record.qfi, pred * scale, row.join(","))?;
    }
    println!("wrote {} latent rows ({} dims) to {}", records.len(), latent, out.display());
    Ok(true)
}

pub fn golden_cmd() -> Result<bool> {
    let results = dqs_core::golden::check_candidates::<f64>()?;
    let mut all_ok = true;
    for r in &results {
        let qfi_mark = if r.qfi_ok() { "ok" } else { "FAIL" };
        let state_mark = if r.state_ok() { "ok" } else { "FAIL" };
        all_ok &= r.qfi_ok() && r.state_ok();
        println!(
            "{:<12} qfi {:>7.3} (expected {:>4.0}) {}  | stated-state fidelity {:.6} {}  | success {:.4}",
            r.name, r.qfi, r.expected_qfi, qfi_mark, r.fidelity_to_stated, state_mark, r.success_prob
        );
    }
    // the four-photon construction from the device-toolbox walkthrough
    let ghz4 = dqs_core::golden::ghz4_setup();
    let probe = postselect(&run_setup::<f64>(&ghz4)?);
    let h = HamiltonianKind::SumZ.build(4);
    let qfi = dqs_core::sensing::qfi_pure(&probe, &h)?;
    let ghz_ok = (qfi - 16.0).abs() <= 1e-9 && (probe.success_prob() - 0.5).abs() <= 1e-9;
    println!(
        "ghz-4        qfi {qfi:>7.3} (expected   16) {}  | success {:.4}",
        if ghz_ok { "ok" } else { "FAIL" },
        probe.success_prob()
    );
    all_ok &= ghz_ok;
    if !all_ok {
        println!(
            "note: the stated c3/c4 product states are unreachable under the device \
             toolbox itself (branch-phase mismatch); magnitudes and QFIs match"
        );
    }
    Ok(all_ok)
}

pub struct PipelineArgs {
    pub toolbox: ToolboxArgs,
    pub train_count: usize,
    pub pool_count: usize,
    pub k: usize,
    pub seed: u64,
    pub hamiltonian: String,
    pub obs: String,
    pub shots: u64,
    pub latent: usize,
    pub epochs: usize,
    pub lr: f64,
    pub prune: bool,
    pub threads: usize,
    pub out: PathBuf,
}

pub fn pipeline_cmd(args: PipelineArgs) -> Result<bool> {
    use rand_chacha::rand_core::SeedableRng;
    let toolbox = toolbox_from(&args.toolbox);
    let n = toolbox.n_photons;
    let kind = hamiltonian_kind(&args.hamiltonian)?;
    let h = kind.build(n);
    let obs_kind = ObservableKind::from_tag(&args.obs)?;
    let threads = effective_threads(args.threads);
    std::fs::create_dir_all(&args.out)?;

    let stage = |name: &str| println!("[{name}]");
    let fail = |name: &str, err: anyhow::Error| anyhow::anyhow!("stage {name} failed: {err:#}");

    stage("gen");
    let t0 = Instant::now();
    let (train_records, _) = generate_labeled(
        &toolbox,
        &h,
        &args.hamiltonian,
        args.train_count,
        dqs_core::derive_seed(args.seed, 1),
        threads,
    )
    .map_err(|e| fail("gen", e.into()))?;
    let train_path = args.out.join("train.jsonl");
    write_jsonl_file(&train_path, &train_records).map_err(|e| fail("gen", e.into()))?;
    let (pool_records, _) = generate_labeled(
        &toolbox,
        &h,
        &args.hamiltonian,
        args.pool_count,
        dqs_core::derive_seed(args.seed, 2),
        threads,
    )
    .map_err(|e| fail("gen", e.into()))?;
    let pool_path = args.out.join("pool.jsonl");
    write_jsonl_file(&pool_path, &pool_records).map_err(|e| fail("gen", e.into()))?;
    println!("  {} train / {} pool in {:.2?}", train_records.len(), pool_records.len(), t0.elapsed());

    stage("train");
    let t0 = Instant::now();
    let data: Vec<(SetupGraph, f64)> = train_records
        .iter()
        .map(|r| Ok((encode_setup(&r.setup, &toolbox)?, r.qfi)))
        .collect::<Result<_, dqs_core::Error>>()
        .map_err(|e| fail("train", e.into()))?;
    let config = ModelConfig {
        latent: args.latent,
        layers: 5,
        heads: 4,
        feature_dim: data[0].0.feature_dim(),
        bn_momentum: 0.1,
        bn_eps: 1e-5,
        label_scale: (n * n) as f64,
    };
    let mut model =
        SurrogateModel::<f64>::new(config, args.seed).map_err(|e| fail("train", e.into()))?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        val_fraction: 0.1,
        ..TrainConfig::desk(args.seed)
    };
    let history = train(&mut model, &data, &cfg).map_err(|e| fail("train", e.into()))?;
    let model_path = args.out.join("model.bin");
    model.save_file(&model_path).map_err(|e| fail("train", e.into()))?;
    let last = history.last().expect("epochs > 0");
    println!(
        "  {} epochs in {:.2?}, train mse {:.6}{}",
        history.len(),
        t0.elapsed(),
        last.train_mse,
        last.val_spearman.map(|r| format!(", val spearman {r:.4}")).unwrap_or_default()
    );

    stage("rank");
    let pool: Vec<(u64, OpticalSetup)> =
        pool_records.iter().map(|r| (r.id, r.setup.clone())).collect();
    let mut ranked =
        rank_candidates(&model, &pool, &toolbox, args.k).map_err(|e| fail("rank", e.into()))?;

    stage("validate");
    validate(&mut ranked, &h).map_err(|e| fail("validate", e.into()))?;
    let ranked_path = args.out.join("ranked.csv");
    write_ranked_csv(
        &ranked,
        std::io::BufWriter::new(
            std::fs::File::create(&ranked_path).map_err(|e| fail("validate", e.into()))?,
        ),
    )
    .map_err(|e| fail("validate", e.into()))?;
    for (i, entry) in ranked.entries.iter().enumerate() {
        println!(
            "  #{}: id {} predicted {:.3} oracle {:.3}",
            i + 1,
            entry.id,
            entry.predicted_qfi,
            entry.oracle_qfi.unwrap_or(f64::NAN)
        );
    }
    let best = ranked
        .entries
        .iter()
        .max_by(|a, b| {
            a.oracle_qfi
                .unwrap_or(0.0)
                .partial_cmp(&b.oracle_qfi.unwrap_or(0.0))
                .expect("finite oracle labels")
        })
        .expect("k >= 1")
        .clone();
    let mut best_setup = best.setup.clone();
    let best_oracle = best.oracle_qfi.unwrap_or(0.0);
    if best_oracle <= 0.0 {
        bail!("stage validate failed: no ranked candidate post-selects to a usable probe");
    }

    if args.prune {
        stage("prune");
        let mut rng = ChaCha8Rng::seed_from_u64(dqs_core::derive_seed(args.seed, 3));
        let trials = default_prune_trials(&best_setup);
        best_setup =
            prune_setup(&best_setup, &h, trials, &mut rng).map_err(|e| fail("prune", e.into()))?;
        println!("  {} devices after pruning", best_setup.device_count());
    }

    stage("sense");
    let t0 = Instant::now();
    let probe = postselect(&run_setup::<f64>(&best_setup).map_err(|e| fail("sense", e.into()))?);
    let degree = kind.default_degree(n);
    let channel = PauliChannel::new(probe, h.clone(), obs_kind.build(n));
    let report = run_sensing(
        &channel,
        n,
        degree,
        Shots::Finite(args.shots),
        dqs_core::derive_seed(args.seed, 4),
    )
    .map_err(|e| fail("sense", e.into()))?;
    let sens_path = args.out.join("sensitivity.csv");
    report
        .write_sensitivity_csv(
            std::fs::File::create(&sens_path).map_err(|e| fail("sense", e.into()))?,
        )
        .map_err(|e| fail("sense", e.into()))?;
    println!("  sensing done in {:.2?}", t0.elapsed());

    let min_sensitivity = report.min_sensitivity;
    let reaches_two_hl = min_sensitivity.map(|m| m <= 2.0 * report.hl).unwrap_or(false);
    let config = json!({
        "photons": n, "q": toolbox.grid_q, "train_count": args.train_count,
        "pool_count": args.pool_count, "k": args.k, "h": args.hamiltonian,
        "obs": args.obs, "shots": args.shots, "latent": args.latent,
        "epochs": args.epochs, "lr": args.lr, "prune": args.prune,
    });
    let mut manifest = Manifest::new("pipeline", config, args.seed);
    let summary = json!({
        "config_hash": manifest.config_hash,
        "best_candidate": {
            "id": best.id,
            "predicted_qfi": best.predicted_qfi,
            "oracle_qfi": best_oracle,
            "setup": best_setup.text(),
        },
        "best_oracle_qfi": best_oracle,
        "min_sensitivity": min_sensitivity,
        "sql": report.sql,
        "hl": report.hl,
        "reaches_two_hl": reaches_two_hl,
    });
    let summary_path = args.out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    println!(
        "best oracle qfi {best_oracle:.3}; min sensitivity {}; 2*HL = {:.6} -> {}",
        min_sensitivity.map(|m| format!("{m:.6}")).unwrap_or_else(|| "inf".into()),
        2.0 * report.hl,
        if reaches_two_hl { "reached" } else { "not reached" }
    );
    for path in [&train_path, &pool_path, &model_path, &ranked_path, &sens_path, &summary_path] {
        manifest.record(path)?;
    }
    manifest.write_next_to(&summary_path)?;
    Ok(true)
}
