//! Mean-risk portfolio selection over scenario returns.
//!
//! Weights are optimized by Nelder–Mead in coordinates of the affine set
//! cut out by the budget and (optional) target-return equalities, so both
//! hold to rounding error at every trial point. Non-negativity and a
//! positive mean are enforced with an exact penalty whose weight grows
//! over a fixed number of rounds.

mod frontier;
pub mod nelder_mead;

pub use frontier::{efficient_frontier, FrontierPoint, FrontierResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ScenarioMatrix;
use crate::risk::{RiskError, RiskKind, RiskMeasureConfig};
use nelder_mead::{minimize_with_restarts, NelderMeadOptions};

/// Largest asset count [`grid_oracle`] accepts.
pub const ORACLE_MAX_ASSETS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid oracle supports at most {max} assets, got {got}")]
    TooManyAssets { max: usize, got: usize },
    #[error("target return {target} outside the feasible range [{min}, {max}]")]
    InfeasibleTarget { target: f64, min: f64, max: f64 },
    #[error("no feasible portfolio has a positive mean")]
    NonPositiveMeanRegion,
    #[error("need at least 2 scenarios, got {0}")]
    TooFewScenarios(usize),
    #[error("grid step must divide 1, got {0}")]
    BadStep(f64),
    #[error("no grid candidate satisfies the constraints")]
    NoFeasibleCandidate,
    #[error("a frontier needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// A risk-minimization problem over one scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    pub scenarios: ScenarioMatrix,
    /// Per-asset mean returns.
    pub means: Vec<f64>,
    pub allow_short: bool,
    pub target_return: Option<f64>,
    pub measure: RiskMeasureConfig,
}

impl PortfolioProblem {
    pub fn new(scenarios: ScenarioMatrix, measure: RiskMeasureConfig) -> Result<Self, PortfolioError> {
        if scenarios.n_scenarios() < 2 {
            return Err(PortfolioError::TooFewScenarios(scenarios.n_scenarios()));
        }
        measure.validate()?;
        Ok(Self {
            means: scenarios.means(),
            scenarios,
            allow_short: false,
            target_return: None,
            measure,
        })
    }

    pub fn with_target(mut self, target: Option<f64>) -> Self {
        self.target_return = target;
        self
    }

    pub fn with_short(mut self, allow_short: bool) -> Self {
        self.allow_short = allow_short;
        self
    }

    pub fn n_assets(&self) -> usize {
        self.scenarios.n_assets()
    }

    fn mean_of(&self, w: &[f64]) -> f64 {
        self.means.iter().zip(w).map(|(m, x)| m * x).sum()
    }

    fn mean_range(&self) -> (f64, f64) {
        let min = self.means.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// Risk of a weight vector.
    pub fn risk(&self, w: &[f64]) -> Result<f64, PortfolioError> {
        let r = portfolio_returns(&self.scenarios, w)?;
        Ok(self.measure.evaluate(&r)?)
    }
}

/// Per-scenario portfolio returns.
pub fn portfolio_returns(scenarios: &ScenarioMatrix, weights: &[f64]) -> Result<Vec<f64>, PortfolioError> {
    if weights.len() != scenarios.n_assets() {
        return Err(PortfolioError::DimensionMismatch {
            expected: scenarios.n_assets(),
            got: weights.len(),
        });
    }
    Ok(scenarios
        .rows()
        .map(|r| r.iter().zip(weights).map(|(a, w)| a * w).sum())
        .collect())
}

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rounds: usize,
    pub penalty_growth: f64,
    pub diameter_tol: f64,
    pub max_evals: usize,
    pub restarts: usize,
    pub initial_step: f64,
    /// Also start from blends of `w0` with each vertex when there are at
    /// most this many assets.
    pub multistart_max_assets: usize,
    /// With at most [`ORACLE_MAX_ASSETS`] assets, also start from this many
    /// of the best points of a simplex grid with step 0.1.
    pub grid_seeds: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rounds: 5,
            penalty_growth: 10.0,
            diameter_tol: 1e-8,
            max_evals: 20_000,
            restarts: 4,
            initial_step: 0.1,
            multistart_max_assets: 6,
            grid_seeds: 3,
        }
    }
}

/// Optimized weights with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSolution {
    pub weights: Vec<f64>,
    pub mean: f64,
    pub risk: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub budget_residual: f64,
    pub target_residual: Option<f64>,
    /// Largest negative part removed by the final repair.
    pub repaired_violation: f64,
}

/// `base + basis * z`, with orthonormal basis vectors.
#[derive(Debug, Clone)]
struct AffineSet {
    base: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl AffineSet {
    /// Weights summing to one, with mean `target` when given.
    fn new(means: &[f64], target: Option<f64>) -> Result<Self, PortfolioError> {
        let n = means.len();
        let nf = n as f64;
        let q1 = vec![1.0 / nf.sqrt(); n];
        let mut rows = vec![q1.clone()];
        let mut base = vec![1.0 / nf; n];
        if let Some(t) = target {
            let along = dot(means, &q1);
            let perp: Vec<f64> = means.iter().zip(&q1).map(|(m, q)| m - along * q).collect();
            let size = norm(&perp);
            let scale = norm(means).max(f64::MIN_POSITIVE);
            let avg = means.iter().sum::<f64>() / nf;
            if size <= 1e-12 * scale {
                if (t - avg).abs() > 1e-12 * scale.max(t.abs()) {
                    return Err(PortfolioError::InfeasibleTarget {
                        target: t,
                        min: avg,
                        max: avg,
                    });
                }
            } else {
                let q2: Vec<f64> = perp.iter().map(|p| p / size).collect();
                let c = (t - avg) / size;
                for (b, q) in base.iter_mut().zip(&q2) {
                    *b += c * q;
                }
                rows.push(q2);
            }
        }
        let dim = n - rows.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for i in 0..n {
            if basis.len() == dim {
                break;
            }
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            for _ in 0..2 {
                for q in rows.iter().chain(&basis) {
                    let c = dot(&v, q);
                    for (x, y) in v.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let s = norm(&v);
            if s > 1e-6 {
                basis.push(v.iter().map(|x| x / s).collect());
            }
        }
        Ok(Self { base, basis })
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn point(&self, z: &[f64]) -> Vec<f64> {
        let mut w = self.base.clone();
        for (c, b) in z.iter().zip(&self.basis) {
            for (x, y) in w.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        w
    }

    fn coords(&self, w: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = w.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|b| dot(b, &d)).collect()
    }
}

fn negative_part(w: &[f64]) -> f64 {
    w.iter().map(|x| (-x).max(0.0)).sum()
}

/// Clip negative weights, then restore the equalities with the smallest
/// change on the remaining support. Repeats while clipping is needed.
fn repair(w: &mut [f64], means: &[f64], target: Option<f64>) {
    for _ in 0..2 * w.len() + 2 {
        for x in w.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        let rb = 1.0 - w.iter().sum::<f64>();
        let rt = target.map(|t| t - dot(means, w));
        let delta: Vec<f64> = match rt {
            None => {
                let c = rb / free.len() as f64;
                free.iter().map(|_| c).collect()
            }
            Some(rt) => {
                // Solve (A_F A_F^T) y = r for rows (1, mu) restricted to F.
                let k = free.len() as f64;
                let sm: f64 = free.iter().map(|&i| means[i]).sum();
                let smm: f64 = free.iter().map(|&i| means[i] * means[i]).sum();
                let det = k * smm - sm * sm;
                if det.abs() <= 1e-300 || det.abs() <= 1e-14 * (k * smm).abs() {
                    let c = rb / k;
                    free.iter().map(|_| c).collect()
                } else {
                    let y1 = (smm * rb - sm * rt) / det;
                    let y2 = (k * rt - sm * rb) / det;
                    free.iter().map(|&i| y1 + y2 * means[i]).collect()
                }
            }
        };
        for (&i, d) in free.iter().zip(&delta) {
            w[i] += d;
        }
        if w.iter().all(|x| *x >= 0.0) {
            return;
        }
    }
    for x in w.iter_mut() {
        *x = x.max(0.0);
    }
}

/// Minimize the problem's measure from `w0`.
pub fn min_risk(problem: &PortfolioProblem, w0: &[f64]) -> Result<PortfolioSolution, PortfolioError> {
    min_risk_with(problem, w0, &SolverOptions::default())
}

pub fn min_risk_with(
    problem: &PortfolioProblem,
    w0: &[f64],
    opts: &SolverOptions,
) -> Result<PortfolioSolution, PortfolioError> {
    let n = problem.n_assets();
    if w0.len() != n {
        return Err(PortfolioError::DimensionMismatch {
            expected: n,
            got: w0.len(),
        });
    }
    if problem.means.len() != n {
        return Err(PortfolioError::DimensionMismatch {
            expected: n,
            got: problem.means.len(),
        });
    }
    problem.measure.validate()?;
    let (lo, hi) = problem.mean_range();
    let needs_positive = matches!(problem.measure.kind, RiskKind::ExtendedGini | RiskKind::Gs1);
    let tol = 1e-12 * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);

    if let Some(t) = problem.target_return {
        if !problem.allow_short && (t < lo - tol || t > hi + tol) {
            return Err(PortfolioError::InfeasibleTarget { target: t, min: lo, max: hi });
        }
        if needs_positive && t <= 0.0 {
            return Err(PortfolioError::NonPositiveMeanRegion);
        }
        if !problem.allow_short && (t >= hi - tol || t <= lo + tol) {
            // Only the assets at the extreme mean are feasible; the
            // lowest-index one takes everything.
            let want = if t >= hi - tol { hi } else { lo };
            let k = problem.means.iter().position(|m| *m == want).expect("extreme exists");
            let mut w = vec![0.0; n];
            w[k] = 1.0;
            return finish(problem, w, 0, 0, true, 0.0);
        }
    } else if needs_positive && hi <= 0.0 && (!problem.allow_short || hi == lo) {
        return Err(PortfolioError::NonPositiveMeanRegion);
    }

    let affine = AffineSet::new(&problem.means, problem.target_return)?;
    if affine.dim() == 0 {
        let w = affine.point(&[]);
        if !problem.allow_short && w.iter().any(|x| *x < -1e-12) {
            return Err(PortfolioError::InfeasibleTarget {
                target: problem.target_return.unwrap_or(f64::NAN),
                min: lo,
                max: hi,
            });
        }
        let mut w = w;
        if !problem.allow_short {
            repair(&mut w, &problem.means, problem.target_return);
        }
        return finish(problem, w, 0, 1, true, 0.0);
    }

    let mut starts = vec![affine.coords(w0)];
    if n <= opts.multistart_max_assets {
        for i in 0..n {
            let blend: Vec<f64> = w0
                .iter()
                .enumerate()
                .map(|(j, x)| 0.5 * x + if i == j { 0.5 } else { 0.0 })
                .collect();
            starts.push(affine.coords(&blend));
        }
    }

    let raw = |w: &[f64]| -> Option<f64> {
        let r = portfolio_returns(&problem.scenarios, w).ok()?;
        problem.measure.evaluate(&r).ok().filter(|v| v.is_finite())
    };
    if n <= ORACLE_MAX_ASSETS && opts.grid_seeds > 0 {
        let tol = 0.05 * (hi - lo);
        let mut ranked: Vec<(f64, Vec<f64>)> = simplex_grid(n, 0.1)?
            .into_iter()
            .filter(|w| problem.target_return.is_none_or(|t| (problem.mean_of(w) - t).abs() <= tol))
            .filter_map(|w| raw(&w).map(|v| (v, w)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        starts.extend(ranked.iter().take(opts.grid_seeds).map(|(_, w)| affine.coords(w)));
    }
    let reference = raw(&affine.point(&starts[0])).map_or(1.0, f64::abs);
    let mut rho = 10.0 * reference.max(1e-12);
    let fail_level = 1e10 * (1.0 + reference);

    let penalized = |z: &[f64], rho: f64| -> f64 {
        let w = affine.point(z);
        let neg = if problem.allow_short { 0.0 } else { negative_part(&w) };
        let mut excess = rho * (neg + neg * neg);
        if needs_positive {
            let mu = problem.mean_of(&w);
            if mu <= 0.0 {
                return fail_level * (1.0 + neg - mu);
            }
        }
        match raw(&w) {
            Some(v) => {
                excess += v;
                excess
            }
            None => fail_level * (1.0 + neg),
        }
    };

    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged = false;
    let mut current = starts;
    let mut step = opts.initial_step;
    for _round in 0..opts.rounds.max(1) {
        let nm = NelderMeadOptions {
            step,
            diameter_tol: opts.diameter_tol,
            max_evals: opts.max_evals,
        };
        let mut best: Option<(Vec<f64>, f64, bool)> = None;
        for z in &current {
            let r = minimize_with_restarts(|z| penalized(z, rho), z, &nm, opts.restarts);
            iterations += r.iterations;
            evaluations += r.evaluations;
            if best.as_ref().is_none_or(|b| r.value < b.1) {
                best = Some((r.x, r.value, r.converged));
            }
        }
        let (z, _, ok) = best.expect("at least one start");
        converged = ok;
        current = vec![z];
        rho *= opts.penalty_growth;
        step = (step * 0.3).max(opts.diameter_tol * 100.0);
    }

    let mut w = affine.point(&current[0]);
    let violation = if problem.allow_short {
        0.0
    } else {
        w.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max)
    };
    if !problem.allow_short {
        repair(&mut w, &problem.means, problem.target_return);
    }
    finish(problem, w, iterations, evaluations, converged, violation)
}

fn finish(
    problem: &PortfolioProblem,
    weights: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    repaired_violation: f64,
) -> Result<PortfolioSolution, PortfolioError> {
    let mean = problem.mean_of(&weights);
    let risk = problem.risk(&weights)?;
    let budget_residual = (weights.iter().sum::<f64>() - 1.0).abs();
    let target_residual = problem.target_return.map(|t| (mean - t).abs());
    let feasible = budget_residual <= 1e-8
        && target_residual.is_none_or(|r| r <= 1e-6)
        && (problem.allow_short || weights.iter().all(|x| *x >= -1e-10))
        && repaired_violation <= 1e-6;
    Ok(PortfolioSolution {
        weights,
        mean,
        risk,
        iterations,
        evaluations,
        converged: converged && feasible,
        budget_residual,
        target_residual,
        repaired_violation,
    })
}

/// Every non-negative weight vector with entries on multiples of `step`
/// summing to 1, first coordinate ascending slowest.
pub fn simplex_grid(n: usize, step: f64) -> Result<Vec<Vec<f64>>, PortfolioError> {
    let units = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (units * step - 1.0).abs() > 1e-9 {
        return Err(PortfolioError::BadStep(step));
    }
    let k = units as usize;
    let mut out = Vec::new();
    let mut counts = vec![0usize; n];
    fn fill(i: usize, left: usize, k: usize, counts: &mut [usize], out: &mut Vec<Vec<f64>>) {
        let n = counts.len();
        if i + 1 == n {
            counts[i] = left;
            out.push(counts.iter().map(|c| *c as f64 / k as f64).collect());
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            fill(i + 1, left - c, k, counts, out);
        }
    }
    if n > 0 {
        fill(0, k, k, &mut counts, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub weights: Vec<f64>,
    pub risk: f64,
    /// Candidates whose risk was evaluated.
    pub evaluated: usize,
}

/// Exhaustive search over [`simplex_grid`]. With a target, candidates
/// must have a mean within `mean_tol` of it; the default is half a step
/// times the spread of asset means. The first candidate with the
/// smallest risk wins.
pub fn grid_oracle(
    problem: &PortfolioProblem,
    step: f64,
    mean_tol: Option<f64>,
) -> Result<OracleResult, PortfolioError> {
    let n = problem.n_assets();
    if n > ORACLE_MAX_ASSETS {
        return Err(PortfolioError::TooManyAssets {
            max: ORACLE_MAX_ASSETS,
            got: n,
        });
    }
    let (lo, hi) = problem.mean_range();
    let tol = mean_tol.unwrap_or(0.5 * step * (hi - lo));
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluated = 0;
    for w in simplex_grid(n, step)? {
        if let Some(t) = problem.target_return {
            if (problem.mean_of(&w) - t).abs() > tol {
                continue;
            }
        }
        let Ok(r) = problem.risk(&w) else { continue };
        evaluated += 1;
        if best.as_ref().is_none_or(|b| r < b.1) {
            best = Some((w, r));
        }
    }
    let (weights, risk) = best.ok_or(PortfolioError::NoFeasibleCandidate)?;
    Ok(OracleResult {
        weights,
        risk,
        evaluated,
    })
}
