use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mrsde::cli::{self, CommandOpts};
use mrsde::Error;

/// Numerical laboratory for one-dimensional mean-reflected SDEs.
#[derive(Parser)]
#[command(name = "mrsde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interacting particle simulation; writes paths.csv, kpath.csv, summary.json
    Simulate(RunArgs),
    /// Deterministic solvers; writes skeleton.csv
    Skeleton(RunArgs),
    /// Endpoint rate functional; writes rate.csv
    Rate(RunArgs),
    /// Derivative kernels and density diagnostic; writes kernel.csv, density.csv
    Malliavin(RunArgs),
    /// Rare-event probability scan; writes ldp.csv
    Ldp(RunArgs),
    /// Scheme convergence and small-noise limit studies; writes converge.csv, epslimit.csv
    Converge(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Bound on worker threads (outputs do not depend on it)
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the seed from the config section
    #[arg(long)]
    seed: Option<u64>,
}

fn run(command: &Command) -> Result<(), Error> {
    let args = match command {
        Command::Simulate(a)
        | Command::Skeleton(a)
        | Command::Rate(a)
        | Command::Malliavin(a)
        | Command::Ldp(a)
        | Command::Converge(a) => a,
    };
    let loaded = cli::load_config(&args.config)?;
    let opts = CommandOpts {
        out_dir: args.out.clone(),
        workers: args.workers,
        seed_override: args.seed,
    };
    match command {
        Command::Simulate(_) => cli::cmd_simulate(&loaded, &opts),
        Command::Skeleton(_) => cli::cmd_skeleton(&loaded, &opts),
        Command::Rate(_) => cli::cmd_rate(&loaded, &opts),
        Command::Malliavin(_) => cli::cmd_malliavin(&loaded, &opts),
        Command::Ldp(_) => cli::cmd_ldp(&loaded, &opts),
        Command::Converge(_) => cli::cmd_converge(&loaded, &opts),
    }
}

/// Exit codes: 0 success, 2 configuration error, 3 numerical abort.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite { .. }
        | Error::OptimizerFailed { .. }
        | Error::EventTooRare { .. }
        | Error::BracketFailure { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
