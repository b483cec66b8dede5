//! `pitchguard`: batch front end for the injury-risk toolkit.

mod commands;
mod failure;
mod output;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::output::Context;

#[derive(Debug, Parser)]
#[command(
    name = "pitchguard",
    version,
    about = "Injury-risk analytics for football squads"
)]
struct Cli {
    /// Seed for every random choice; reports record it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for grid and fold fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory for `synth`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// DTW distance between two sequences.
    Dtw(commands::dtw::Args),
    /// Gram matrix of a kernel over a set of inputs.
    Gram(commands::gram::Args),
    /// Truncated leave-one-out grid search of the exposure GP.
    GpSweep(commands::sweep::Args),
    /// Generalized linear model fit.
    Glm(commands::glm::Args),
    /// Supervised PCA on weekly GPS aggregates.
    Spca(commands::spca::Args),
    /// Cross-validated GA feature selection.
    Featsel(commands::featsel::Args),
    /// Agreement metrics between predictions and truth.
    Metrics(commands::metrics::Args),
    /// Synthetic squad data.
    Synth(commands::synth::Args),
    /// Repeated k-fold cross-validation of a classifier.
    Cv(commands::cv::Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Dtw(_) => "dtw",
            Self::Gram(_) => "gram",
            Self::GpSweep(_) => "gp-sweep",
            Self::Glm(_) => "glm",
            Self::Spca(_) => "spca",
            Self::Featsel(_) => "featsel",
            Self::Metrics(_) => "metrics",
            Self::Synth(_) => "synth",
            Self::Cv(_) => "cv",
        }
    }
}

fn run(cli: Cli, invocation: Vec<String>) -> anyhow::Result<()> {
    let mut ctx = Context::new(
        cli.command.name(),
        cli.seed,
        cli.config.as_deref(),
        cli.out,
        invocation,
    )?;
    match cli.command {
        Command::Dtw(a) => commands::dtw::run(&mut ctx, a)?,
        Command::Gram(a) => commands::gram::run(&mut ctx, a)?,
        Command::GpSweep(a) => commands::sweep::run(&mut ctx, a)?,
        Command::Glm(a) => commands::glm::run(&mut ctx, a)?,
        Command::Spca(a) => commands::spca::run(&mut ctx, a)?,
        Command::Featsel(a) => commands::featsel::run(&mut ctx, a)?,
        Command::Metrics(a) => commands::metrics::run(&mut ctx, a)?,
        Command::Synth(a) => commands::synth::run(&mut ctx, a)?,
        Command::Cv(a) => commands::cv::run(&mut ctx, a)?,
    }
    ctx.commit()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                failure::VALIDATION
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let invocation = output::normalized_invocation(&args[1..]);
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(failure::VALIDATION);
        }
    };
    match pool.install(|| run(cli, invocation)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure::exit_code(&e))
        }
    }
}
