//! `orthodual`: batch front-end for the duality, kernel and fluctuation-field
//! checks.
//!
//! Exit status: 0 success, 2 invalid input, 3 numerical failure, 4 a
//! statistical or rate check failed (its files are still written).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "orthodual",
    version,
    about = "Orthogonal duality checks for independent walkers and exclusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// Worker threads for the data-parallel loops.
    #[arg(long, global = true, env = "ORTHODUAL_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Single-walker tables, or finite dual kernels with `--box`.
    Kernel,
    /// Monte Carlo against the exact duality covariance.
    Duality,
    /// Space-time covariances of fluctuation fields.
    Covariance,
    /// Rescaled covariances against the Gaussian limit.
    Scaling,
    /// Decay rate of the time-integrated field covariance.
    BgRate,
    /// Ratio of the walker kernel to its Gaussian approximation.
    Lclt,
    /// Orthogonal expansion of a local function.
    Expand,
    /// Covariance and marginals from a slowly varying Poisson profile.
    Nonstationary,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Core(orthodual::Error),
    Io(std::io::Error),
}

impl From<orthodual::Error> for CliError {
    fn from(e: orthodual::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(orthodual::Error::Io(_)) | CliError::Io(_) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

fn run(cli: &Cli) -> Result<commands::Verdict, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("thread count must be positive".into()));
        }
        orthodual::exec::set_thread_count(n);
    }
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Kernel => commands::kernel(&cfg),
        Command::Duality => commands::duality(&cfg),
        Command::Covariance => commands::covariance(&cfg),
        Command::Scaling => commands::scaling(&cfg),
        Command::BgRate => commands::bg_rate(&cfg),
        Command::Lclt => commands::lclt(&cfg),
        Command::Expand => commands::expand(&cfg),
        Command::Nonstationary => commands::nonstationary(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) if v.pass => {
            println!("PASS {}", v.summary);
            ExitCode::SUCCESS
        }
        Ok(v) => {
            println!("FAIL {}", v.summary);
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
