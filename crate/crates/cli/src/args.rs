//! Flag definitions. Every value flag is optional so that a JSON config
//! file can fill it; defaults are applied after merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "hd-qkd-ratekit",
    version,
    about = "Key rates for high-dimensional QKD with multiple mutually unbiased bases"
)]
pub struct Cli {
    /// Print a JSON run record instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// JSON file with flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Asymptotic key rate for given error rates.
    Asymptotic(AsymptoticArgs),
    /// Largest symmetric error rate with a positive asymptotic rate.
    Threshold(ThresholdArgs),
    /// Optimized finite-size key rate.
    Finite(FiniteArgs),
    /// Write the CSV files for one of the standard figures.
    Figure(FigureArgs),
    /// Run the built-in invariant checks.
    Verify(VerifyArgs),
    /// Sweep one parameter and write a CSV table.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Asymptotic(_) => "asymptotic",
            Command::Threshold(_) => "threshold",
            Command::Finite(_) => "finite",
            Command::Figure(_) => "figure",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundArg {
    Eur,
    Aep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackArg {
    Collective,
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsModeArg {
    DeriveEps,
    FixedEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Perturb the oracle's λ before it is checked.
    CorruptLambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVar {
    Q,
    N,
    D,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Asymptotic,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct AsymptoticArgs {
    /// Local dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of measured bases.
    #[arg(long)]
    pub m: Option<usize>,
    /// Symmetric error rate for all bases.
    #[arg(long)]
    pub q: Option<f64>,
    /// Error rate of the first XZ^k basis (two-basis shorthand).
    #[arg(long)]
    pub qx: Option<f64>,
    /// Error rate of the computational basis (two-basis shorthand).
    #[arg(long)]
    pub qz: Option<f64>,
    /// Comma-separated rates: Q_Z first, then Q_XZ^k for k = 0, 1, ...
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub rates: Option<Vec<f64>>,
    /// Accept basis counts without a guaranteed MUB construction.
    #[arg(long)]
    pub allow_unguaranteed: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ThresholdArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub allow_unguaranteed: bool,
}

/// Parameters shared by `finite` and finite-size sweeps.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FiniteParams {
    /// Local dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of measured bases.
    #[arg(long)]
    pub m: Option<usize>,
    /// Tolerated symmetric error rate.
    #[arg(long)]
    pub q: Option<f64>,
    /// Total security budget [default: 1e-10].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Min-entropy bound [default: aep].
    #[arg(long, value_enum)]
    pub bound: Option<BoundArg>,
    /// Attack model [default: collective].
    #[arg(long, value_enum)]
    pub attack: Option<AttackArg>,
    /// Measurement incompatibility in bits [default: log2 d].
    #[arg(long)]
    pub c: Option<f64>,
    /// Error-correction inefficiency [default: 1].
    #[arg(long)]
    pub f: Option<f64>,
    /// How eps is read for coherent attacks [default: derive-eps].
    #[arg(long, value_enum)]
    pub eps_mode: Option<EpsModeArg>,
    #[arg(long)]
    pub allow_unguaranteed: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FiniteArgs {
    /// Total number of rounds (scientific notation accepted).
    #[arg(long)]
    pub n: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: FiniteParams,
    /// Evaluate at this number of test rounds instead of optimizing.
    #[arg(long)]
    pub k: Option<f64>,
    /// Budget weights for eps, eps_EC, eps_PA when --k is given [default: 1/3,1/3,1/3].
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub name: Option<FigureName>,
    /// Output directory [default: .].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Coherent-attack budget reading for fig5 [default: derive-eps].
    #[arg(long, value_enum)]
    pub eps_mode: Option<EpsModeArg>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// [default: quick]
    #[arg(value_enum)]
    pub level: Option<Level>,
    /// Seed for random test states [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Deliberately break one check (tests the harness itself).
    #[arg(long, value_enum)]
    pub inject_fault: Option<Fault>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SweepArgs {
    /// Variable to sweep.
    #[arg(long, value_enum)]
    pub var: Option<SweepVar>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub stop: Option<f64>,
    /// Number of grid points, at least 2.
    #[arg(long)]
    pub points: Option<usize>,
    /// Grid spacing [default: linear, log for N].
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Asymptotic or finite-size rate [default: finite for N, else asymptotic].
    #[arg(long, value_enum)]
    pub kind: Option<RateKind>,
    /// Fixed total rounds for finite sweeps over other variables.
    #[arg(long)]
    pub n: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: FiniteParams,
    /// [default: csv]
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
