//! `matcomp`: representational transfer learning for noisy matrix
//! completion.
//!
//! Subcommands: `complete` (debiased estimate of one matrix), `transfer`
//! (oracle or gated non-oracle transfer pipeline), `infer` (confidence
//! interval for a bilinear functional of the fitted model), and `simulate`
//! (seeded Monte Carlo comparison of estimators).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{
    cmd_complete, cmd_infer, cmd_simulate, cmd_transfer, CompleteArgs, InferArgs, SimulateArgs,
    TransferArgs, TransferMode,
};
use matcomp_core::Error;

#[derive(Parser)]
#[command(name = "matcomp", version, about = "Representational transfer matrix completion")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Seed for all randomness; identical invocations reproduce bit-identical
    /// outputs (manifest timing excluded).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Bound internal parallelism (falls back to MATCOMP_THREADS, then all
    /// cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Emit JSON on stdout where applicable.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Debias one partially observed matrix into a dense estimate (CSV).
    Complete {
        /// Observation CSV with header a,b,y.
        #[arg(long)]
        obs: PathBuf,
        /// Number of matrix rows.
        #[arg(long)]
        p: usize,
        /// Number of matrix columns.
        #[arg(long)]
        q: usize,
        /// Working rank of the completion.
        #[arg(long)]
        rank: usize,
        /// Fold count for the sample splitting.
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Output CSV path (a manifest JSON is written alongside).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a transfer model from source observation files.
    Transfer {
        /// Target observation CSV.
        #[arg(long)]
        target: PathBuf,
        /// Source observation CSV (repeatable).
        #[arg(long = "source")]
        sources: Vec<PathBuf>,
        /// Pipeline variant.
        #[arg(long, value_enum)]
        mode: Mode,
        /// Transfer configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output model JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Confidence interval for u' Theta v under a fitted model.
    Infer {
        /// Model JSON produced by `transfer`.
        #[arg(long)]
        model: PathBuf,
        /// Target observation CSV (used for the plug-in variance).
        #[arg(long)]
        obs: PathBuf,
        /// Query vector: e:<index> or a path to a one-value-per-line file.
        #[arg(long)]
        u: String,
        /// Query vector: e:<index> or a path to a one-value-per-line file.
        #[arg(long)]
        v: String,
        /// Confidence level in (0, 1).
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Optional JSON artifact path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded Monte Carlo experiment from a configuration file.
    Simulate {
        /// Experiment configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output JSON path (a flat CSV is written with extension .csv).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum Mode {
    Oracle,
    Nora,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NumericFailure(_) | Error::DegenerateInput(_) => 3,
        Error::DegenerateQuery(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.global.threads.or_else(|| {
        std::env::var("MATCOMP_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    let seed = cli.global.seed;
    let json = cli.global.json;
    let quiet = cli.global.quiet;
    let result = match cli.command {
        Command::Complete { obs, p, q, rank, folds, out } => {
            cmd_complete(CompleteArgs { obs, p, q, rank, folds, out, seed, quiet })
        }
        Command::Transfer { target, sources, mode, config, out } => cmd_transfer(TransferArgs {
            target,
            sources,
            mode: match mode {
                Mode::Oracle => TransferMode::Oracle,
                Mode::Nora => TransferMode::Nora,
            },
            config,
            out,
            seed,
            quiet,
        }),
        Command::Infer { model, obs, u, v, level, out } => cmd_infer(InferArgs {
            model,
            obs,
            u_spec: u,
            v_spec: v,
            level,
            out,
            json,
            quiet,
        }),
        Command::Simulate { config, out } => cmd_simulate(SimulateArgs { config, out, seed, quiet }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
