//! `cdn`: check, query and validate cumulative distribution networks, and
//! run the structured ranking model on match logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cdn_core::CdnError;

mod check;
mod infer;
mod oracle;
mod output;
mod rank;

#[derive(Debug, Parser)]
#[command(name = "cdn", version, about = "Cumulative distribution networks")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance for validity checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check tree structure and the three validity conditions of a model.
    Check(check::Args),
    /// Conditional CDF of a query variable, or the joint PDF when fully observed.
    Infer(infer::Args),
    /// Run the verification suites.
    Oracle(oracle::Args),
    /// Fit, evaluate and predict with the ranking model.
    #[command(subcommand)]
    Rank(rank::Command),
}

/// Global settings shared by every subcommand.
pub struct Context {
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub output: Option<PathBuf>,
}

/// Exit status for a library error: 2 for bad input, 1 otherwise.
pub fn error_code(e: &CdnError) -> u8 {
    match e {
        CdnError::Parse { .. }
        | CdnError::Schema { .. }
        | CdnError::Io { .. }
        | CdnError::InvalidQuery(_)
        | CdnError::UnknownVariable(_)
        | CdnError::DuplicateName(_)
        | CdnError::InvalidParams(_)
        | CdnError::InvalidMatch(_)
        | CdnError::InvalidDomain(_)
        | CdnError::DomainError(_)
        | CdnError::InsufficientData(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let ctx = Context { seed: cli.seed, tolerance: cli.tolerance, output: cli.output };
    let result = match cli.command {
        Command::Check(a) => check::run(&ctx, &a),
        Command::Infer(a) => infer::run(&ctx, &a),
        Command::Oracle(a) => oracle::run(&ctx, &a),
        Command::Rank(c) => rank::run(&ctx, &c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
