mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use gimm_core::error::Error;
use gimm_core::eval::AblationVariant;

use config::RunConfig;

/// InfoMin-Max automated graph contrastive learning.
#[derive(Parser)]
#[command(name = "gimm", version, about)]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for checkpoints, logs, and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Fold/run-level parallelism (1 = fully sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Per-field override, e.g. --set gen_tau=0.2 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the view generator and write its checkpoint.
    TrainGenerator,
    /// Train the comparison encoder from a generator checkpoint.
    TrainEncoder {
        #[arg(long)]
        generator: PathBuf,
    },
    /// Export downstream embeddings as CSV.
    Embed {
        #[arg(long)]
        generator: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
    },
    /// Full pipeline evaluation with the configured protocol.
    Evaluate,
    /// Run one ablation variant (or all seven).
    Ablate {
        /// full | uni | feat | edge | simp | viewm | simult | all
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Sensitivity sweep over the (p_s1, p_s2) grid.
    Sweep,
    /// Chain train-generator, train-encoder, embed, and evaluate.
    All,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    for spec in &cli.overrides {
        cfg.apply_override(spec)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::TrainGenerator => {
            commands::cmd_train_generator(&cfg)?;
            Ok(())
        }
        Command::TrainEncoder { generator } => {
            commands::cmd_train_encoder(&cfg, generator)?;
            Ok(())
        }
        Command::Embed { generator, encoder } => {
            commands::cmd_embed(&cfg, generator, encoder)?;
            Ok(())
        }
        Command::Evaluate => commands::cmd_evaluate(&cfg),
        Command::Ablate { variant } => {
            let v = if variant == "all" {
                None
            } else {
                Some(AblationVariant::from_str(variant)?)
            };
            commands::cmd_ablate(&cfg, v)
        }
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::All => commands::cmd_all(&cfg),
    }
}

/// 0 success, 2 usage/config error, 3 data error, 4 numerical divergence.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Io { .. } => 2,
        Error::Divergence { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
