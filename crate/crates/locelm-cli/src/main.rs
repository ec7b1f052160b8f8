//! Command-line front end: solve built-in benchmark problems with locally
//! trained random-feature networks, report errors against the exact
//! solutions, and sweep resolution parameters.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use locelm::problems;

#[derive(Parser)]
#[command(
    name = "locelm",
    version,
    about = "Solve benchmark PDEs with domain-decomposed random-feature networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem; writes a JSON report and a point-cloud CSV.
    Solve {
        /// Path to a JSON run configuration.
        config: PathBuf,
    },
    /// Re-solve while varying one parameter; writes a CSV of errors and times.
    Sweep {
        /// Path to a JSON run configuration (the sweep baseline).
        config: PathBuf,
        /// Parameter to vary: n_subdomains, q_per_direction, m, r_m, or n_blocks.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values, e.g. `10,20,30`.
        #[arg(long)]
        values: String,
    },
    /// List the built-in problems.
    Problems,
}

/// CLI failure categories, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, arguments, or output paths (exit 2).
    Config(String),
    /// The training run itself failed (exit 3).
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    /// Prefix the message with the context in which it occurred.
    fn amend(self, context: String) -> Self {
        match self {
            CliError::Config(msg) => CliError::Config(format!("{context}: {msg}")),
            CliError::Solver(msg) => CliError::Solver(format!("{context}: {msg}")),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Solver(msg) => write!(f, "solver error: {msg}"),
        }
    }
}

fn list_problems() {
    println!("{:<14} {:>4}  {}", "id", "dims", "kind");
    for id in problems::PROBLEM_IDS {
        let problem = problems::by_name(id).expect("built-in problem");
        let kind = match (problem.dims.time_order, problem.nonlinearity.is_some()) {
            (0, false) => "steady, linear".to_owned(),
            (0, true) => "steady, nonlinear".to_owned(),
            (order, false) => format!("time-dependent (order {order}), linear"),
            (order, true) => format!("time-dependent (order {order}), nonlinear"),
        };
        println!("{:<14} {:>3}D  {}", id, problem.dims.spatial, kind);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve { config } => config::load(config).and_then(|c| run::solve(&c)),
        Command::Sweep { config, param, values } => {
            config::load(config).and_then(|c| run::sweep(&c, param, values))
        }
        Command::Problems => {
            list_problems();
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
