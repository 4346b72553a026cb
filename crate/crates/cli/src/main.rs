//! `vlbf`: evaluate, optimize and simulate VLBF codes from the command line.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys are the
//! subcommand's long flag names; flags given on the command line win.
//!
//! Exit codes: 0 success, 1 I/O failure or failed simulation bound check,
//! 2 usage, 3 infeasible optimization, 4 numeric-domain error.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    BoundArgs, NpArgs, OptimizeArgs, RcuArgs, ReportArgs, SimulateArgs, SweepArgs,
};

#[derive(Parser)]
#[command(name = "vlbf", version, about = "Variable-length bursty-feedback code bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// RCU bound of a random code on the BSC.
    Rcu(RcuArgs),
    /// Neyman-Pearson confirmation test errors.
    Np(NpArgs),
    /// Time and error bounds for a given schedule and thresholds.
    Bound(BoundArgs),
    /// Optimize the schedule and thresholds for one codebook size.
    Optimize(OptimizeArgs),
    /// Optimized rate versus expected decoding time, as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo simulation of the coding scheme with a bound check.
    Simulate(SimulateArgs),
    /// Feedback times normalized by the time bound, from a sweep CSV.
    ScheduleReport(ReportArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
    Domain(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Domain(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Infeasible(m) | CliError::Domain(m) | CliError::Failed(m) => m,
        }
    }
}

impl From<vlbf_core::Error> for CliError {
    fn from(e: vlbf_core::Error) -> Self {
        use vlbf_core::Error as E;
        match e {
            E::Domain { .. } | E::InvalidChannel(_) | E::InvalidDistribution(_) => {
                CliError::Domain(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rcu(a) => commands::rcu(a),
        Command::Np(a) => commands::np(a),
        Command::Bound(a) => commands::bound(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::ScheduleReport(a) => commands::schedule_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
