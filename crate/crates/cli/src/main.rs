//! `campana`: classify points, count Campana points by height, scan Vojta
//! gaps, cross-check against oracles and run the elliptic-curve census.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration or model error,
//! 3 point on the boundary, 4 network failure with no cached data.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use campana_core::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "campana", version, about = "Exact arithmetic of Campana points on P^1 and P^2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify one point and print its contact with each component.
    Classify(ClassifyArgs),
    /// Count points by height bucket and fit growth exponents.
    Enumerate(EnumerateArgs),
    /// Vojta gap and counting-function chain at every Campana point.
    VojtaGap(VojtaArgs),
    /// Compare the classifier with an independent oracle.
    Verify(VerifyArgs),
    /// Torsion census of elliptic-curve records.
    Census(CensusArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (TOML).
    #[arg(long)]
    pub model: PathBuf,
    /// Replace the finite primes of S, e.g. `2,3`; an empty string clears S.
    #[arg(long)]
    pub set_s: Option<String>,
    /// Replace the weights, e.g. `1/2,1/3`; fractions or integers only.
    #[arg(long)]
    pub eps: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Directory for report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Point as comma-separated integers, e.g. `8,9`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub height_bound: u64,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Keep points lying on the boundary in the totals.
    #[arg(long)]
    pub include_boundary: bool,
    /// `auto` uses the exact coordinate sieve where it applies.
    #[arg(long, default_value = "auto", value_parser = ["auto", "sweep"])]
    pub method: String,
    /// Lines through at least three Campana points to report (P^2 only).
    #[arg(long, default_value_t = 10)]
    pub top_lines: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VojtaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub height_bound: u64,
    /// Nonnegative rational, e.g. `1/10`.
    #[arg(long, default_value = "0")]
    pub delta: String,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub height_bound: u64,
    /// `squarefull`, `s-unit` or `constant-true`; by default the first one
    /// that applies to the model.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    /// Local CSV with columns `label,conductor,torsion`.
    #[arg(long, conflicts_with = "remote")]
    pub input: Option<PathBuf>,
    /// Fetch from the remote API, caching pages on disk.
    #[arg(long)]
    pub remote: bool,
    /// Remote endpoint settings (TOML); defaults are used when absent.
    #[arg(long, requires = "remote")]
    pub remote_config: Option<PathBuf>,
    /// Cache directory; defaults to $CAMPANA_CENSUS_CACHE or `.campana-cache`.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Maximum number of records.
    #[arg(long, default_value_t = 100_000)]
    pub limit: usize,
    /// Primes excluded from the semistability test, e.g. `2,3`.
    #[arg(long)]
    pub set_s: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<CoreError>()) {
        Some(CoreError::Network(_)) => 4,
        Some(CoreError::OnComponent { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Classify(a) => commands::classify(a),
        Command::Enumerate(a) => commands::enumerate(a),
        Command::VojtaGap(a) => commands::vojta_gap(a),
        Command::Verify(a) => commands::verify(a),
        Command::Census(a) => commands::census(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
