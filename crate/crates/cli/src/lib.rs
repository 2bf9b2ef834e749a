//! The `fhspec` command line.
//!
//! Every subcommand prints one JSON document to stdout and writes CSV
//! artifacts to the output directory. Exit codes: 0 success, 1 internal
//! error, 2 violated precondition, 64 usage error.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "FHSPEC_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "fhspec", version, about = "Fourier-Hermite symbol analysis of operator systems on the torus times R^n")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV artifacts [default: $FHSPEC_OUTPUT_DIR, else the working directory].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Truncation grid; flags override the `[grid]` section of the config.
#[derive(Args, Clone, Debug, Default)]
pub struct GridArgs {
    /// Largest |τ_k|, one value per time axis or a single value for all.
    #[arg(long, value_delimiter = ',')]
    pub tau_max: Vec<i64>,
    /// Largest eigen index (inclusive, 0-based).
    #[arg(long)]
    pub j_max: Option<u64>,
    /// Number of weight shells.
    #[arg(long)]
    pub shells: Option<usize>,
}

/// Decision thresholds; flags override the `[thresholds]` section.
#[derive(Args, Clone, Debug, Default)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub admissibility_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FlavorArg {
    #[value(name = "GH", alias = "gh")]
    Gh,
    #[value(name = "GS", alias = "gs")]
    Gs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Inverse,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symbols σ_{L_r}(τ, j) and ‖σ_𝕃‖ at one mode.
    Symbol {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        tau: Vec<i64>,
        #[arg(long)]
        j: u64,
    },
    /// Joint zero set on the grid, with the exact finiteness decision.
    ZeroSet {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Global hypoellipticity verdict.
    CheckHypo {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Global solvability verdict.
    CheckSolv {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// F = 𝕃u for a field CSV; writes a data-vector manifest.
    Apply {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// File stem of the written components.
        #[arg(long, default_value = "f")]
        stem: String,
    },
    /// Solves 𝕃u = F for admissible data.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// Data-vector manifest.
        #[arg(long)]
        data: PathBuf,
        /// Field with the solution's values on the zero set.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long, default_value = "u")]
        stem: String,
    },
    /// Counterexample data from small-divisor witnesses.
    Counterexample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum)]
        flavor: FlavorArg,
        /// Witness CSV `tau_1..tau_m,j`; by default every grid mode with
        /// 0 < ‖σ_𝕃‖ < exp(−eps·weight).
        #[arg(long)]
        witnesses: Option<PathBuf>,
        /// Decay rate defining witnesses [default: delta1].
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long, default_value = "counterexample")]
        stem: String,
    },
    /// Classifies a field as smooth, ultradistribution, or neither.
    DecayFit {
        #[arg(long)]
        field: PathBuf,
        /// Config supplying the weight parameters when the sidecar has none.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Exponential-Liouville test from exact continued fractions.
    Liouville {
        /// `factorial-power:B`, `exp-rule:C`, `constant:C` or `golden`;
        /// repeat for the coordinates of a vector.
        #[arg(long)]
        rule: Vec<String>,
        /// Explicit partial quotients `a_1,a_2,…` of a finite fraction.
        #[arg(long, value_delimiter = ',')]
        quotients: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        depth: usize,
    },
    /// Fits the Weyl law |λ_j| ≈ ρ j^e.
    Weyl {
        /// Config whose `[eigen]` section names the spectrum.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// `harmonic` or `harmonic-nd:N`, when no config is given.
        #[arg(long, default_value = "harmonic")]
        eigen: String,
        #[arg(long, default_value_t = 1000)]
        j0: u64,
        #[arg(long, default_value_t = 1_000_000)]
        j1: u64,
    },
    /// Averages, phase map, reduced system and conjugation checks for a
    /// time-dependent system.
    NormalForm {
        /// Time-dependent config with `[[coefficient]]` sections.
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// FFT points per time axis.
        #[arg(long, value_delimiter = ',')]
        nt: Vec<usize>,
        /// Writes the normal-form config here.
        #[arg(long)]
        reduced: Option<PathBuf>,
        /// Field whose compatibility integrals are evaluated.
        #[arg(long)]
        compat: Option<PathBuf>,
        /// 0-based time axis of the compatibility integral.
        #[arg(long, default_value_t = 0)]
        r: usize,
    },
    /// Applies the conjugation Ψ or its inverse to a field.
    Psi {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum, default_value = "forward")]
        direction: DirectionArg,
        #[arg(long, value_delimiter = ',')]
        nt: Vec<usize>,
        #[arg(long, default_value = "psi")]
        stem: String,
    },
    /// Evaluates a field on a (t, x) grid.
    Reconstruct {
        #[arg(long)]
        field: PathBuf,
        /// Config naming the eigenbasis [default: 1-D harmonic oscillator].
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Points per torus axis.
        #[arg(long, value_delimiter = ',', default_value = "32")]
        t_points: Vec<usize>,
        #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
        x_max: f64,
        /// Points per spatial axis.
        #[arg(long, default_value_t = 61)]
        x_count: usize,
        #[arg(long, default_value = "reconstruction")]
        stem: String,
    },
}

/// Failure of a subcommand.
#[derive(Debug)]
pub enum CliError {
    /// A violated input contract, with an optional JSON report for stderr.
    Precondition { contract: String, message: String, report: Option<Value> },
    Internal(String),
}

impl CliError {
    pub fn precondition(contract: &str, message: impl Into<String>) -> Self {
        CliError::Precondition { contract: contract.into(), message: message.into(), report: None }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition { .. } => EXIT_PRECONDITION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Name of the contract a library error violates.
fn contract(e: &fhspec::Error) -> &'static str {
    use fhspec::Error::*;
    match e {
        InvalidParams(_) => "valid parameters",
        OutOfRange { .. } => "eigen index within the spectrum",
        UnsupportedBasis(_) => "basis with eigenfunctions",
        FitDomain(_) => "fit range with positive eigenvalues",
        OutOfBounds(_) => "mode within the field bounds",
        Shape(_) => "matching shapes",
        DegenerateSystem(_) => "non-degenerate system",
        GridTooLarge(_) => "grid size limit",
        Inadmissible { .. } => "admissible data",
        InvalidWitness(_) => "witnesses with nonzero symbol inside the bounds",
        InsufficientDepth(_) => "materialisable continued fraction depth",
        Regularity(_) => "regularity restriction M·mu - 1 <= sigma",
        Resolution(_) => "time grid resolving the bounds",
        Parse(_) => "well-formed input",
        Io(_) | Csv(_) | Json(_) => "input and output files",
    }
}

impl From<fhspec::Error> for CliError {
    fn from(e: fhspec::Error) -> Self {
        if !e.is_precondition() {
            return CliError::Internal(e.to_string());
        }
        let report = match &e {
            fhspec::Error::Inadmissible { report, .. } => serde_json::to_value(report).ok(),
            _ => None,
        };
        CliError::Precondition { contract: contract(&e).into(), message: e.to_string(), report }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INTERNAL;
        }
    };
    let result = pool.install(|| commands::dispatch(cli.command, &out_dir));
    match result {
        Ok(doc) => {
            let mut text = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
            text.push('\n');
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return EXIT_INTERNAL;
            }
            EXIT_OK
        }
        Err(e) => {
            match &e {
                CliError::Precondition { contract, message, report } => {
                    eprintln!("error: precondition violated ({contract}): {message}");
                    if let Some(r) = report {
                        eprintln!("{}", serde_json::to_string_pretty(r).unwrap_or_default());
                    }
                }
                CliError::Internal(message) => eprintln!("error: {message}"),
            }
            e.exit_code()
        }
    }
}
