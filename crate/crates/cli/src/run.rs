use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lorenz_lab::curves::{
    analytic_quantile, empirical_quantile, AnalyticFamily, CurveError, LognormalScale, QuantileCurve,
};
use lorenz_lab::data::{
    clean_panel, compute_returns, copula_simulate, historical_scenarios, load_price_panel, CopulaFamily, DataError,
    DataWarning, Frequency, ReturnKind, ScenarioMatrix,
};
use lorenz_lab::iterate::{limit_curve, run_iteration, IterateError, IterationConfig, IterationMode, IterationWarning, LimitMode};
use lorenz_lab::lorenz::LorenzError;
use lorenz_lab::portfolio::{efficient_frontier, portfolio_returns, PortfolioError, PortfolioProblem};
use lorenz_lab::risk::{target_curve, RiskError, RiskKind, RiskMeasureConfig, TargetCurveSpec};
use serde::Serialize;
use thiserror::Error;

use crate::args::*;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// The reader of standard output went away.
    #[error("output closed")]
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Closed => 0,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CurveError> for CliError {
    fn from(e: CurveError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::BadSpec(_) | RiskError::BadTailFraction(_) | RiskError::BadAversion(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LorenzError> for CliError {
    fn from(e: LorenzError) -> Self {
        match e {
            LorenzError::Curve(c) => c.into(),
            LorenzError::NonPositiveMean(_)
            | LorenzError::NegativeSupport(_)
            | LorenzError::SupportExceedsUnit(_)
            | LorenzError::NotDistribution(_) => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<IterateError> for CliError {
    fn from(e: IterateError) -> Self {
        match e {
            IterateError::Lorenz(l) => l.into(),
            IterateError::ZeroIterations | IterateError::BadTolerance(_) => CliError::Usage(e.to_string()),
            IterateError::Io(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<PortfolioError> for CliError {
    fn from(e: PortfolioError) -> Self {
        match e {
            PortfolioError::Risk(r) => r.into(),
            PortfolioError::TooFewPoints(_) | PortfolioError::BadStep(_) => CliError::Usage(e.to_string()),
            PortfolioError::DimensionMismatch { .. }
            | PortfolioError::InfeasibleTarget { .. }
            | PortfolioError::NonPositiveMeanRegion
            | PortfolioError::TooFewScenarios(_)
            | PortfolioError::TooManyAssets { .. } => CliError::Data(e.to_string()),
            PortfolioError::NoFeasibleCandidate => CliError::Numeric(e.to_string()),
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Numeric(e.to_string()))
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Command,
}

/// Writes one output file plus its `<path>.config.json` sidecar.
fn write_file(
    path: &Path,
    command: &Command,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    let sidecar = Provenance {
        tool: "lorenz-lab",
        version: env!("CARGO_PKG_VERSION"),
        config: command,
    };
    std::fs::write(suffixed(path, ".config.json"), json(&sidecar)?)?;
    Ok(())
}

/// Main output: the `--out` file, or standard output.
fn emit(
    out: &Option<PathBuf>,
    command: &Command,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, command, body),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_numbers(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Data(format!("{what}: not a number: {t:?}")))
        })
        .collect()
}

/// First column of a CSV, skipping a non-numeric header line.
fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::Data(format!(
                    "{}: line {}: not a number: {field:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn parse_start(spec: &str) -> Result<AnalyticFamily, CliError> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let values = parse_numbers(params, "--start").map_err(|e| CliError::Usage(e.to_string()))?;
    let want = |n: usize| {
        if values.len() == n {
            Ok(())
        } else {
            Err(CliError::Usage(format!("--start {name} takes {n} parameter(s), got {}", values.len())))
        }
    };
    let family = match name {
        "uniform" => {
            want(0)?;
            AnalyticFamily::Uniform01
        }
        "kumaraswamy" => {
            want(0)?;
            AnalyticFamily::KumaraswamyLimit
        }
        "power" => {
            want(1)?;
            AnalyticFamily::Power(values[0])
        }
        "point" => {
            want(1)?;
            AnalyticFamily::PointMass(values[0])
        }
        "pareto" => {
            want(2)?;
            AnalyticFamily::Pareto {
                scale: values[0],
                shape: values[1],
            }
        }
        "lognormal" | "lognormal-log" => {
            want(2)?;
            AnalyticFamily::Lognormal {
                mean: values[0],
                sd: values[1],
                scale: if name == "lognormal" {
                    LognormalScale::Variable
                } else {
                    LognormalScale::Log
                },
            }
        }
        _ => return Err(CliError::Usage(format!("--start: unknown family {name:?}"))),
    };
    family.validate().map_err(|e| CliError::Usage(format!("--start: {e}")))?;
    Ok(family)
}

fn check_grid(grid: usize) -> Result<(), CliError> {
    if grid < 2 {
        return Err(CliError::Usage(format!("--grid must be at least 2, got {grid}")));
    }
    Ok(())
}

fn apply_target(mut spec: TargetCurveSpec, t: &TargetArgs) -> TargetCurveSpec {
    let fields = [
        (&mut spec.beta_down, t.beta_down),
        (&mut spec.beta_up, t.beta_up),
        (&mut spec.gamma_down_pa, t.gamma_down_pa),
        (&mut spec.gamma_down_p, t.gamma_down_p),
        (&mut spec.gamma_up_pa, t.gamma_up_pa),
        (&mut spec.gamma_up_p, t.gamma_up_p),
    ];
    for (slot, value) in fields {
        if let Some(v) = value {
            *slot = v;
        }
    }
    spec
}

fn measure_config(opts: &MeasureOptions) -> Result<RiskMeasureConfig, CliError> {
    let kind: RiskKind = opts
        .measure
        .parse()
        .map_err(|e| CliError::Usage(format!("--measure: {e}")))?;
    let mut cfg = RiskMeasureConfig::new(kind).with_v(opts.v).with_scale(opts.scale);
    if let Some(c) = opts.confidence {
        // Round away the residue of 1 - c so 0.95 gives a tail of exactly 0.05.
        cfg = cfg.with_tail_fraction(((1.0 - c) * 1e12).round() / 1e12);
    } else if let Some(p) = opts.tail_fraction {
        cfg = cfg.with_tail_fraction(p);
    }
    if opts.target.any() {
        let base = cfg
            .target
            .ok_or_else(|| CliError::Usage(format!("target-curve flags do not apply to --measure {}", kind.name())))?;
        cfg = cfg.with_target(apply_target(base, &opts.target));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_data_warnings(warnings: &[DataWarning]) {
    for w in warnings {
        match w {
            DataWarning::DegenerateColumn { ticker } => {
                eprintln!("warning: column {ticker:?} is constant and is simulated as that constant")
            }
        }
    }
}

fn iterate(a: &IterateArgs, command: &Command) -> Result<(), CliError> {
    check_grid(a.grid)?;
    let start: QuantileCurve = match (&a.input, &a.start) {
        (Some(path), _) => empirical_quantile(&read_samples(path)?, a.grid)?,
        (None, Some(spec)) => analytic_quantile(parse_start(spec)?, a.grid)?,
        (None, None) => return Err(CliError::Usage("one of --input or --start is required".into())),
    };
    let mode = match a.mode {
        ModeArg::Primal => IterationMode::Primal,
        ModeArg::Reflected => IterationMode::Reflected,
    };
    let config = IterationConfig {
        max_iter: a.max_iter,
        tol: a.tol,
        normalize: a.normalize_support,
    };
    let trace = run_iteration(&start, mode, config)?;
    for w in &trace.warnings {
        let IterationWarning::NoProgress { iteration, level } = w;
        eprintln!("warning: no progress from iteration {iteration} at distance {level:e}");
    }
    emit(&a.output.out, command, |w| Ok(trace.write_csv(w)?))?;
    if let Some(dir) = &a.curves_dir {
        trace.write_curves(dir)?;
    }
    let last = *trace.sup_successive.last().expect("non-empty trace");
    if a.tol > 0.0 && !(last < a.tol) {
        return Err(CliError::Numeric(format!(
            "no convergence to {:e} within {} iterations (last step {last:e})",
            a.tol, a.max_iter
        )));
    }
    Ok(())
}

fn limits(a: &LimitsArgs, command: &Command) -> Result<(), CliError> {
    check_grid(a.grid)?;
    let mode = match a.mode {
        LimitArg::Primal => LimitMode::Primal,
        LimitArg::Reflected => LimitMode::Reflected,
        LimitArg::SimpleReflected => LimitMode::SimpleReflected,
    };
    let curve = limit_curve(mode, a.grid);
    emit(&a.output.out, command, |w| Ok(curve.curve().write_csv(w)?))
}

fn read_scenarios(path: &Path) -> Result<ScenarioMatrix, CliError> {
    ScenarioMatrix::read_csv(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_weights(spec: &Option<String>, n: usize) -> Result<Vec<f64>, CliError> {
    let Some(spec) = spec else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec)?
    } else {
        spec.clone()
    };
    let w = parse_numbers(&text, "--weights")?;
    if w.len() != n {
        return Err(CliError::Data(format!("--weights has {} entries for {n} assets", w.len())));
    }
    Ok(w)
}

#[derive(Serialize)]
struct MeasureOutput<'a> {
    measure: RiskMeasureConfig,
    tickers: &'a [String],
    weights: &'a [f64],
    value: f64,
    mu: f64,
    integral_target: Option<f64>,
    knots: usize,
}

fn measure(a: &MeasureArgs, command: &Command) -> Result<(), CliError> {
    let cfg = measure_config(&a.measure)?;
    let m = read_scenarios(&a.scenarios)?;
    let weights = read_weights(&a.weights, m.n_assets())?;
    let samples = portfolio_returns(&m, &weights)?;
    let report = cfg.report(&samples)?;
    let out = MeasureOutput {
        measure: cfg,
        tickers: &m.tickers,
        weights: &weights,
        value: report.value,
        mu: report.mu,
        integral_target: report.integral_target,
        knots: report.knots,
    };
    let text = json(&out)?;
    emit(&a.output.out, command, |w| Ok(w.write_all(text.as_bytes())?))
}

fn target(a: &TargetCurveArgs, command: &Command) -> Result<(), CliError> {
    check_grid(a.grid)?;
    let base = match a.variant {
        VariantArg::Gs1 => TargetCurveSpec::identity(),
        VariantArg::Gs2 => TargetCurveSpec::gs2(0.75),
    };
    let t = target_curve(apply_target(base, &a.target), a.grid)?;
    emit(&a.output.out, command, |w| Ok(t.curve.write_csv(w)?))
}

fn frontier(a: &FrontierArgs, command: &Command) -> Result<(), CliError> {
    let cfg = measure_config(&a.measure)?;
    if a.n_points < 2 {
        return Err(CliError::Usage(format!("--n-points must be at least 2, got {}", a.n_points)));
    }
    let m = read_scenarios(&a.scenarios)?;
    let problem = PortfolioProblem::new(m, cfg)?.with_short(a.allow_short);
    let result = efficient_frontier(&problem, a.n_points)?;
    emit(&a.output.out, command, |w| Ok(result.write_csv(w)?))?;
    let diagnostics = a
        .diagnostics
        .clone()
        .or_else(|| a.output.out.as_ref().map(|p| suffixed(p, ".diagnostics.json")));
    if let Some(path) = diagnostics {
        let text = json(&result)?;
        std::fs::write(&path, text)?;
    }
    for (k, p) in result.points.iter().enumerate().skip(1) {
        if !p.converged {
            eprintln!(
                "warning: frontier point {} (target {}) did not converge{}",
                k + 1,
                p.target_return,
                p.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
            );
        }
    }
    if !result.points[0].converged {
        return Err(CliError::Numeric("the minimum-risk solve did not converge".into()));
    }
    Ok(())
}

fn clean(a: &CleanArgs, command: &Command) -> Result<(), CliError> {
    let mut panel = load_price_panel(open(&a.input)?)?;
    if let Some(k) = a.take_every {
        if k == 0 {
            return Err(CliError::Usage("--take-every must be at least 1".into()));
        }
        panel = panel.take_every(k);
    }
    let (cleaned, report) = clean_panel(&panel, a.coverage).map_err(|e| match e {
        DataError::BadCoverage(_) => CliError::Usage(format!("--coverage: {e}")),
        other => other.into(),
    })?;
    emit(&a.output.out, command, |w| Ok(cleaned.write_csv(w)?))?;
    let report_path = a
        .report
        .clone()
        .or_else(|| a.output.out.as_ref().map(|p| suffixed(p, ".report.json")));
    if let Some(path) = report_path {
        let text = json(&report)?;
        std::fs::write(&path, text)?;
    }
    Ok(())
}

fn returns(a: &ReturnsArgs, command: &Command) -> Result<(), CliError> {
    let panel = load_price_panel(open(&a.input)?)?;
    let frequency = match a.frequency {
        FrequencyArg::Daily => Frequency::Daily,
        FrequencyArg::Weekly => Frequency::Weekly,
    };
    let kind = match a.kind {
        ReturnKindArg::Simple => ReturnKind::Simple,
        ReturnKindArg::Log => ReturnKind::Log,
    };
    let r = compute_returns(&panel, frequency, kind)?;
    emit(&a.output.out, command, |w| Ok(r.write_csv(w)?))
}

fn simulate(a: &SimulateArgs, command: &Command) -> Result<(), CliError> {
    let history = read_scenarios(&a.input)?;
    let scenarios = match a.method {
        MethodArg::Historical => historical_scenarios(&history, a.t)?,
        MethodArg::Copula => {
            let out = copula_simulate(&history, a.n, a.seed, CopulaFamily::Gaussian)?;
            print_data_warnings(&out.warnings);
            out.scenarios
        }
    };
    emit(&a.output.out, command, |w| Ok(scenarios.write_csv(w)?))
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Iterate(a) => iterate(a, command),
        Command::Limits(a) => limits(a, command),
        Command::Measure(a) => measure(a, command),
        Command::TargetCurve(a) => target(a, command),
        Command::Frontier(a) => frontier(a, command),
        Command::Clean(a) => clean(a, command),
        Command::Returns(a) => returns(a, command),
        Command::Simulate(a) => simulate(a, command),
    }
}
