//! Batch front end for the lattice-gas cluster-expansion library: forward
//! maps, inverse solves, exact finite-volume oracles, roundtrips, and
//! self-checks, driven by flags and/or a JSON config. Exit codes: 0 ok,
//! 1 numerical failure, 2 bad configuration, 3 I/O failure.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{FileConfig, FlagConfig};
use gibbs_inverse_core::Error;

/// CLI failures carrying their exit code: configuration problems exit 2,
/// numerical failures 1, I/O failures 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    fn io(msg: String) -> Self {
        CliError::Io(msg)
    }

    /// Library errors surfacing while inputs are being assembled: the user
    /// gave something inconsistent.
    fn from_validation(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Library errors surfacing mid-computation: divergence and budget
    /// exhaustion are numerical outcomes; shape and parameter complaints
    /// still point back at the configuration.
    fn from_run(e: Error) -> Self {
        match e {
            Error::Diverged { .. } | Error::NonConvergence { .. } => {
                CliError::Numeric(e.to_string())
            }
            Error::InvalidParameter { .. }
            | Error::SpecValidation(_)
            | Error::DimensionMismatch { .. }
            | Error::WindowTooSmall { .. }
            | Error::VolumeTooLarge { .. }
            | Error::OutsideVolume { .. }
            | Error::OrderOverflow { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gibbs-inverse",
    version,
    about = "Forward and inverse cluster expansions for the lattice Gibbs gas",
    after_help = "Exit codes: 0 ok, 1 numerical failure, 2 bad configuration, 3 I/O failure."
)]
struct Cli {
    /// JSON config file; flags override its values. A report.json from an
    /// earlier run works too (its \"config\" member is used).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated cluster expansion: (z, potential) -> density and pair correlation
    Forward(CommonArgs),
    /// Fixed-point inverse: target (density, pair correlation) -> (z, potential)
    Invert(CommonArgs),
    /// Exact finite-volume enumeration: partition function, correlations, volume sweep
    Oracle(CommonArgs),
    /// Forward then invert, reporting how well the generating pair is recovered
    Roundtrip(CommonArgs),
    /// Self-checks: algebra identities and an empirical contraction certificate
    Check(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward(_) => "forward",
            Command::Invert(_) => "invert",
            Command::Oracle(_) => "oracle",
            Command::Roundtrip(_) => "roundtrip",
            Command::Check(_) => "check",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Forward(a)
            | Command::Invert(a)
            | Command::Oracle(a)
            | Command::Roundtrip(a)
            | Command::Check(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Lattice dimension (1..=4); input files are authoritative when present
    #[arg(long)]
    dim: Option<usize>,

    /// Truncation order N of the expansions (1..=12)
    #[arg(long)]
    order: Option<usize>,

    /// Window radius: confines lattice sums (forward/invert/roundtrip) or
    /// sets the identity-suite window (check); default is exact summation
    #[arg(long)]
    radius: Option<i32>,

    /// Activity z (forward, oracle, roundtrip) or domain scale z0 (check)
    #[arg(long)]
    z: Option<f64>,

    /// JSON interaction file: {"dim", "phi" and/or "g"}; "inf" marks a hard core
    #[arg(long, value_name = "FILE")]
    potential: Option<PathBuf>,

    /// JSON target file: {"dim", "omega1"|"rho1", "omega2"|"rho2"}
    #[arg(long, value_name = "FILE")]
    target: Option<PathBuf>,

    /// Smallness parameter r of the admissible ball, in (0, 1)
    #[arg(long)]
    r: Option<f64>,

    /// Convergence tolerance of the fixed-point iteration
    #[arg(long)]
    tol: Option<f64>,

    /// Iteration budget of the fixed-point iteration
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,

    /// Largest half-width k of the enumeration boxes [-k, k]^d
    #[arg(long, value_name = "K")]
    k_max: Option<usize>,

    /// Output directory for report.json and the CSV tables
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for the enumeration oracle (env GIBBS_INVERSE_THREADS
    /// is the fallback; default 1)
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn to_flags(&self) -> FlagConfig {
        FlagConfig {
            dim: self.dim,
            order: self.order,
            radius: self.radius,
            z: self.z,
            r: self.r,
            tol: self.tol,
            max_iter: self.max_iter,
            k_max: self.k_max,
            threads: self.threads,
            potential: self.potential.clone(),
            target: self.target.clone(),
            out: self.out.clone(),
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(path) => config::read_file_config(path)?,
        None => FileConfig::default(),
    };
    let flags = cli.command.as_ref().map(|c| c.args().to_flags()).unwrap_or_default();
    let cfg = config::resolve(cli.command.as_ref().map(Command::name), file, flags)?;

    let (results, failed) = commands::run(&cfg)?;
    let report = json!({
        "config": cfg.echo(),
        "results": results,
    });
    let path = io::write_report(&cfg.out, &report)?;
    eprintln!(
        "{}: wrote {}{}",
        cfg.command.name(),
        path.display(),
        if failed { " (numerical failure flagged)" } else { "" }
    );
    Ok(failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error ({}): {}", e.kind(), e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
