//! `dqs` — probe-state search and phase estimation from the command line.
//!
//! Subcommands mirror the pipeline stages: `gen` samples and labels random
//! optical setups, `train`/`eval` fit and score the surrogate, `rank`
//! selects candidates, `prune` strips redundant devices, `sense` runs the
//! agnostic-channel estimation on a probe, `golden` replays the reference
//! eight-photon sequences, and `pipeline` chains everything end to end.
//!
//! Every run writes a manifest with the configuration hash and artifact
//! fingerprints. Exit codes: 0 success, 1 validation/runtime failure,
//! 2 usage error.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dqs", version, about = "optical probe search and quantum phase sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ToolboxArgs {
    /// Photon (= path = qubit) count; must be even.
    #[arg(long, default_value_t = 4)]
    photons: usize,
    /// Wave-plate quantization: angles k*pi/q.
    #[arg(long, default_value_t = 4)]
    q: u32,
    /// Minimum sequence length.
    #[arg(long, default_value_t = 1)]
    lmin: usize,
    /// Maximum sequence length.
    #[arg(long, default_value_t = 15)]
    lmax: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random setups, label them with exact QFI, write JSON-Lines.
    Gen {
        #[command(flatten)]
        toolbox: ToolboxArgs,
        /// Number of distinct setups to generate.
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Encoding Hamiltonian tag: sumZ, sumX, or xxPairs.
        #[arg(long = "h", default_value = "sumZ")]
        hamiltonian: String,
        /// Worker threads (DQS_THREADS overrides).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Train the graph-transformer surrogate on a labeled dataset.
    Train {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, default_value_t = 4)]
        q: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Latent width s.
        #[arg(long, default_value_t = 64)]
        latent: usize,
        #[arg(long, default_value_t = 5)]
        layers: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1e-5)]
        wd: f64,
        #[arg(long, default_value_t = 0.2)]
        val_frac: f64,
        /// Use the reference recipe (lr 1e-4, wd 1e-5, 200 epochs, batch 64).
        #[arg(long, default_value_t = false)]
        reference_recipe: bool,
    },
    /// Score a trained model on a labeled dataset (MSE + Spearman).
    Eval {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        data: std::path::PathBuf,
        /// Optional per-record CSV of (id, qfi_true, qfi_pred).
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Rank a pool of setups by predicted QFI and keep the top K.
    Rank {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Attach exact oracle labels to the top K.
        #[arg(long, default_value_t = false)]
        validate: bool,
        #[arg(long = "h", default_value = "sumZ")]
        hamiltonian: String,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Remove devices that leave the oracle QFI unchanged.
    Prune {
        /// Setup text, e.g. "DCBell(a,b) -> DCBell(c,d) -> R(b)".
        #[arg(long, conflicts_with = "setup_file")]
        setup: Option<String>,
        #[arg(long)]
        setup_file: Option<std::path::PathBuf>,
        #[arg(long = "h", default_value = "sumZ")]
        hamiltonian: String,
        /// Removal attempts (default: 3x sequence length).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate the response of a probe against a hidden channel.
    Sense {
        /// File containing the setup text.
        #[arg(long)]
        setup_file: std::path::PathBuf,
        /// Hamiltonian hidden inside the black-box channel.
        #[arg(long = "h", default_value = "sumZ")]
        hamiltonian: String,
        /// Measurement observable tag: prodX or prodZ.
        #[arg(long, default_value = "prodX")]
        obs: String,
        /// Shots per node reading; ignored with --exact.
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        /// Query the infinite-shot (exact) channel instead of sampling.
        #[arg(long, default_value_t = false)]
        exact: bool,
        /// Interpolation degree (default: inferred from the Hamiltonian).
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for report.json and the CSV curves.
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Export readout latents: (id, qfi_true, qfi_pred, z1..zs).
    ExportLatent {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Replay the reference eight-photon sequences and check states/QFIs.
    Golden,
    /// gen -> train -> rank -> validate -> sense on the best candidate.
    Pipeline {
        #[command(flatten)]
        toolbox: ToolboxArgs,
        #[arg(long, default_value_t = 5000)]
        train_count: usize,
        #[arg(long, default_value_t = 10_000)]
        pool_count: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "h", default_value = "sumZ")]
        hamiltonian: String,
        #[arg(long, default_value = "prodX")]
        obs: String,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 64)]
        latent: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Also prune the best candidate before sensing.
        #[arg(long, default_value_t = false)]
        prune: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: std::path::PathBuf,
    },
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen { toolbox, count, seed, hamiltonian, threads, out } => {
            commands::gen(toolbox, count, seed, &hamiltonian, threads, &out)
        }
        Command::Train {
            data,
            out,
            q,
            seed,
            latent,
            layers,
            heads,
            epochs,
            batch,
            lr,
            wd,
            val_frac,
            reference_recipe,
        } => commands::train_cmd(commands::TrainArgs {
            data,
            out,
            q,
            seed,
            latent,
            layers,
            heads,
            epochs,
            batch,
            lr,
            wd,
            val_frac,
            reference_recipe,
        }),
        Command::Eval { model, data, out } => commands::eval_cmd(&model, &data, out.as_deref()),
        Command::Rank { model, data, k, validate, hamiltonian, out } => {
            commands::rank_cmd(&model, &data, k, validate, &hamiltonian, &out)
        }
        Command::Prune { setup, setup_file, hamiltonian, trials, seed } => {
            commands::prune_cmd(setup, setup_file, &hamiltonian, trials, seed)
        }
        Command::Sense { setup_file, hamiltonian, obs, shots, exact, degree, seed, out } => {
            commands::sense_cmd(commands::SenseArgs {
                setup_file,
                hamiltonian,
                obs,
                shots,
                exact,
                degree,
                seed,
                out,
            })
        }
        Command::ExportLatent { model, data, out } => {
            commands::export_latent_cmd(&model, &data, &out)
        }
        Command::Golden => commands::golden_cmd(),
        Command::Pipeline {
            toolbox,
            train_count,
            pool_count,
            k,
            seed,
            hamiltonian,
            obs,
            shots,
            latent,
            epochs,
            lr,
            prune,
            threads,
            out,
        } => commands::pipeline_cmd(commands::PipelineArgs {
            toolbox,
            train_count,
            pool_count,
            k,
            seed,
            hamiltonian,
            obs,
            shots,
            latent,
            epochs,
            lr,
            prune,
            threads,
            out,
        }),
    };
    match outcome {
        Ok(true) => std::process::ExitCode::SUCCESS,
        Ok(false) => std::process::ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::from(1)
        }
    }
}
