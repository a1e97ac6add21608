//! Command-line driver: basis enumeration, system diagnostics, coefficient
//! recovery, the two experiment pipelines, and the runtime self-check
//! suite.
//!
//! Exit codes: 0 success, 1 runtime failure (structured error on stderr),
//! 2 flag errors (clap usage). A flat `key=value` config file can seed any
//! flag via `--config`; explicit flags win. Worker count comes from
//! `--threads` or the `SPARSE_PCE_THREADS` environment variable.

mod commands;
mod config;

use clap::{Parser, Subcommand};

use commands::{basis, diagnose, experiment, recover, selftest};
use config::ConfigMap;

#[derive(Parser)]
#[command(name = "sparse-pce", version, about = "Sparse Hermite PCE recovery with optional gradient observations")]
struct Cli {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<std::path::PathBuf>,

    /// Worker thread count (default: all cores; also SPARSE_PCE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the ordered multi-index basis as CSV.
    Basis(basis::BasisArgs),
    /// Emit coherence / RIC / null-space diagnostics for a seeded system.
    Diagnose(diagnose::DiagnoseArgs),
    /// Recover coefficients from a measurement-system CSV file.
    Recover(recover::RecoverArgs),
    /// Run a recovery experiment pipeline.
    #[command(subcommand)]
    Experiment(experiment::ExperimentCommand),
    /// Run the quadrature / finite-difference / oracle property suites.
    Selftest,
}

fn main() {
    let cli = Cli::parse();

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = cli.threads.or_else(|| {
        std::env::var("SPARSE_PCE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 && !sparse_pce::exec::configure_threads(n) {
            log::debug!("worker pool already initialized or sequential build; --threads ignored");
        }
    }

    let config = match ConfigMap::load(cli.config.as_deref()) {
        Ok(map) => map,
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    };

    let result = match cli.command {
        Command::Basis(args) => basis::run(args, &config),
        Command::Diagnose(args) => diagnose::run(args, &config),
        Command::Recover(args) => recover::run(args, &config),
        Command::Experiment(cmd) => experiment::run(cmd, &config),
        Command::Selftest => selftest::run(),
    };

    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
