//! `dbar`: command-line driver for the d-bar spectral solvers.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Parser, Debug, Serialize)]
#[command(name = "dbar", version, about = "Spectral CGO solutions and reflection coefficients on the unit disk")]
pub struct Cli {
    /// Worker threads for k-sweeps.
    #[arg(long, env = "DBAR_WORKERS", default_value_t = 1, global = true)]
    #[serde(skip)]
    pub workers: usize,

    /// Run directory for outputs and `manifest.json`.
    #[arg(long, default_value = "dbar-run", global = true)]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Solve for the basis of rim-normalized fundamental solutions.
    Fundamental(FundamentalArgs),
    /// CGO solution and R(k) at one k.
    Cgo(CgoArgs),
    /// CGO solution at one k by fixed-point iteration.
    Iterate(IterateArgs),
    /// R(k) over a grid of real k.
    Sweep(SweepArgs),
    /// Bessel-oracle and cross-method checks.
    Selftest,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct PotentialArgs {
    /// Sampled potential file (`dbar-potential v1` format); overrides the default q ≡ 1.
    #[arg(long)]
    pub potential_file: Option<PathBuf>,
    /// Radial profile as Chebyshev coefficients in 2r−1, e.g. `1,0,0.5`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "potential_file")]
    pub radial: Option<Vec<f64>>,
    /// Complex amplitude `re,im`.
    #[arg(long, default_value = "1", value_parser = parse_complex, allow_hyphen_values = true)]
    #[serde(serialize_with = "ser_complex")]
    pub amplitude: Complex64,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct ResolutionArgs {
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub nphi: Option<usize>,
    /// Double the resolution until q·e^(k̄z̄−kz) is resolved.
    #[arg(long)]
    pub autotune: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct FundamentalArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    pub resolution: ResolutionArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum GaugeArg {
    Psi,
    Phi,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Fundamental,
    Picard,
}

#[derive(Args, Debug, Serialize)]
pub struct CgoArgs {
    /// Spectral parameter `re,im` (a bare real means `re,0`).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    #[serde(serialize_with = "ser_complex")]
    pub k: Complex64,
    #[arg(long, value_enum, default_value_t = GaugeArg::Psi)]
    pub gauge: GaugeArg,
    /// Solver; by default the basis route for |k| ≤ 1 and iteration beyond.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    pub resolution: ResolutionArgs,
    #[command(flatten)]
    pub iteration: IterationArgs,
}

#[derive(Args, Debug, Serialize, Clone, Copy)]
pub struct IterationArgs {
    #[arg(long, default_value_t = dbar_core::picard::DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = dbar_core::picard::DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct IterateArgs {
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    #[serde(serialize_with = "ser_complex")]
    pub k: Complex64,
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    pub resolution: ResolutionArgs,
    #[command(flatten)]
    pub iteration: IterationArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub kmin: f64,
    #[arg(long)]
    pub kmax: f64,
    /// Number of equispaced k samples (endpoints included).
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Picard)]
    pub method: MethodArg,
    /// Add r_asym(k) and k^(5/2)(R − r_asym) columns.
    #[arg(long)]
    pub asym: bool,
    #[command(flatten)]
    pub potential: PotentialArgs,
    /// Fixed resolution; otherwise a |k|-dependent ladder.
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub nphi: Option<usize>,
    #[command(flatten)]
    pub iteration: IterationArgs,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// `re,im` or bare `re`.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected `re,im`, got {text:?}")),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(format!("non-finite value {text:?}"));
    }
    Ok(z)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(err) => {
            let kind = err.downcast_ref::<dbar_core::DbarError>().map_or("error", |e| e.kind());
            let report = serde_json::json!({ "error": { "kind": kind, "message": format!("{err:#}") } });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
