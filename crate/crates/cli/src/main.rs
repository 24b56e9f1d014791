use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fblsec_cli::{run, CliError, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "fblsec", version, about = "Leakage-failure probability experiments for short-packet secure transmission")]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV destination; overrides `output.path`. Standard output if neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte Carlo seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. FBLSEC_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// LFP over an (m, p) grid.
    Eval,
    /// Joint allocation with its per-round trace.
    Solve,
    /// Optimize at every value of a swept parameter.
    Sweep,
    /// Exhaustive grid search.
    Oracle,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("FBLSEC_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("FBLSEC_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if let Some(n) = thread_count(args.threads)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let command = match args.command {
        Cmd::Eval => Command::Eval,
        Cmd::Solve => Command::Solve,
        Cmd::Sweep => Command::Sweep,
        Cmd::Oracle => Command::Oracle,
    };
    let table = run(command, &cfg)?;
    let out = args.out.or(cfg.output.path);
    table.write(out.as_deref())
}

fn main() -> ExitCode {
    match main_inner(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fblsec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
