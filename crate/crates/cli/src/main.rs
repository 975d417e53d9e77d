//! `zcfuse`: synthesize, featurize, train, evaluate, sweep and export.

mod commands;
mod config;
mod error;
mod manifest;
mod pgm;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::*;
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "zcfuse", version, about = "Drone RF recognition and OOD detection on synthetic corpora")]
struct Cli {
    /// TOML run configuration; missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthesis, featurization, initialization and sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for featurize, train, eval and sweep; 1 is sequential.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize IQ records and their manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Split tag that keeps record draws apart: train, val, test or ood.
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Turn a record manifest into TFI and ZC feature files.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on feature directories.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model on feature directories, one row per SNR.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Feature directories; records outside the model's classes are OOD.
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model on fresh draws along one axis.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides [eval] axis.
        #[arg(long)]
        axis: Option<String>,
        /// Overrides [eval] values, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<String>>,
        /// Overrides [eval] repetitions.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Write a feature map or adaptive-weight heatmap as a P5 graymap.
    Export {
        #[arg(long, value_enum)]
        kind: ExportKind,
        #[arg(long)]
        out: PathBuf,
        /// IQ record, for tfi and zcfeature.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Model directory, for spatial-weights and channel-weights.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Command::Sweep {
        axis,
        values,
        repetitions,
        ..
    } = &cli.command
    {
        if let Some(a) = axis {
            config.eval.axis = a.clone();
        }
        if let Some(v) = values {
            config.eval.values = v.clone();
        }
        if let Some(r) = repetitions {
            config.eval.repetitions = *r;
        }
    }
    let ctx = Ctx {
        config,
        seed: cli.seed,
        workers: cli.workers.max(1),
    };
    match cli.command {
        Command::Synth { out, split } => cmd_synth(&ctx, &out, &split).map(|_| ()),
        Command::Featurize { manifest, out } => cmd_featurize(&ctx, &manifest, &out).map(|_| ()),
        Command::Train { train, val, out } => cmd_train(&ctx, &train, &val, &out),
        Command::Eval { model, features, out } => cmd_eval(&ctx, &model, &features, &out).map(|_| ()),
        Command::Sweep { model, out, .. } => cmd_sweep(&ctx, &model, &out).map(|_| ()),
        Command::Export {
            kind,
            out,
            record,
            model,
        } => cmd_export(
            &ctx,
            &ExportRequest {
                kind,
                out,
                record,
                model,
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
