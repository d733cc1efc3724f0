use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "lorenz-lab", version, about = "Iterated Lorenz curves and Lorenz-based portfolio risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Iterate a Lorenz operator from a sample or an analytic start.
    Iterate(IterateArgs),
    /// Write a limit curve.
    Limits(LimitsArgs),
    /// Evaluate a risk measure on weighted scenarios.
    Measure(MeasureArgs),
    /// Write a GS target curve.
    TargetCurve(TargetCurveArgs),
    /// Sweep the mean-risk efficient frontier.
    Frontier(FrontierArgs),
    /// Drop sparse tickers and incomplete dates from a price panel.
    Clean(CleanArgs),
    /// Compute returns from a complete price panel.
    Returns(ReturnsArgs),
    /// Build scenarios from returns, historical or simulated.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Primal,
    Reflected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitArg {
    Primal,
    Reflected,
    SimpleReflected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Gs1,
    Gs2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyArg {
    Daily,
    Weekly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnKindArg {
    Simple,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Copula,
    Historical,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Output file; standard output when omitted. A `<out>.config.json`
    /// sidecar records the resolved arguments.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IterateArgs {
    /// One-column CSV of non-negative samples.
    #[arg(long, conflicts_with = "start", required_unless_present = "start")]
    pub input: Option<PathBuf>,
    /// Analytic start such as `lognormal:0.5,0.2`, `uniform`, `power:3`,
    /// `pareto:1,2.618`, `point:1` or `kumaraswamy`.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long, value_enum, default_value = "primal")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 40)]
    pub max_iter: usize,
    /// Divide the start by its maximum before a reflected run.
    #[arg(long)]
    pub normalize_support: bool,
    /// Also write every iterate as `curve_NNN.csv` into this directory.
    #[arg(long)]
    pub curves_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitsArgs {
    #[arg(long, value_enum, default_value = "primal")]
    pub mode: LimitArg,
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Target-curve fields; unset ones keep the measure's default target.
#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct TargetArgs {
    #[arg(long)]
    pub beta_down: Option<f64>,
    #[arg(long)]
    pub beta_up: Option<f64>,
    #[arg(long)]
    pub gamma_down_pa: Option<f64>,
    #[arg(long)]
    pub gamma_down_p: Option<f64>,
    #[arg(long)]
    pub gamma_up_pa: Option<f64>,
    #[arg(long)]
    pub gamma_up_p: Option<f64>,
}

impl TargetArgs {
    pub fn any(&self) -> bool {
        [
            self.beta_down,
            self.beta_up,
            self.gamma_down_pa,
            self.gamma_down_p,
            self.gamma_up_pa,
            self.gamma_up_p,
        ]
        .iter()
        .any(Option::is_some)
    }
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct MeasureOptions {
    /// variance, mad, cvar, gmd, extended-gini, gs1 or gs2.
    #[arg(long, default_value = "gmd")]
    pub measure: String,
    /// Risk aversion of the extended measures.
    #[arg(long, default_value_t = 2.5)]
    pub v: f64,
    /// CVaR confidence level; the tail fraction is one minus it.
    #[arg(long, conflicts_with = "tail_fraction")]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub tail_fraction: Option<f64>,
    /// Positive multiplier on the measure.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[command(flatten)]
    pub target: TargetArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureArgs {
    /// Scenario CSV, `date,TICKER...`.
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Comma-separated weights, or a file holding them; equal weights when
    /// omitted.
    #[arg(long)]
    pub weights: Option<String>,
    #[command(flatten)]
    pub measure: MeasureOptions,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TargetCurveArgs {
    #[arg(long, value_enum, default_value = "gs1")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FrontierArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n_points: usize,
    #[arg(long)]
    pub allow_short: bool,
    #[command(flatten)]
    pub measure: MeasureOptions,
    /// Per-point solver diagnostics as JSON; defaults to
    /// `<out>.diagnostics.json` when `--out` is given.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CleanArgs {
    /// Price CSV, `date,TICKER...`, empty cells for missing quotes.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub coverage: f64,
    /// Keep only every k-th ticker, starting with the first, before cleaning.
    #[arg(long)]
    pub take_every: Option<usize>,
    /// Cleaning report JSON; defaults to `<out>.report.json` when `--out`
    /// is given.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ReturnsArgs {
    /// Complete price CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "daily")]
    pub frequency: FrequencyArg,
    #[arg(long, value_enum, default_value = "simple")]
    pub kind: ReturnKindArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Returns CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "copula")]
    pub method: MethodArg,
    /// Number of simulated scenarios.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of trailing historical scenarios.
    #[arg(long, default_value_t = 500)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}
