//! Efficient frontier by warm-started constrained solves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{min_risk_with, PortfolioError, PortfolioProblem, SolverOptions};
use crate::format::g17;
use crate::risk::RiskMeasureConfig;

/// How often the sweep is restarted when a later point undercuts the
/// first one.
const MAX_RESWEEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub target_return: f64,
    pub mean: f64,
    pub risk: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Set when the solve failed outright; weights are then the warm start.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierResult {
    pub points: Vec<FrontierPoint>,
    pub measure: RiskMeasureConfig,
    pub n_points: usize,
    pub tickers: Vec<String>,
    pub allow_short: bool,
}

impl FrontierResult {
    /// `target_return,risk,converged,w_<ticker>...`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("target_return,risk,converged");
        for t in &self.tickers {
            header.push_str(",w_");
            header.push_str(t);
        }
        writeln!(out, "{header}")?;
        for p in &self.points {
            let mut line = format!("{},{},{}", g17(p.target_return), g17(p.risk), p.converged);
            for w in &p.weights {
                line.push(',');
                line.push_str(&g17(*w));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Minimum-risk portfolio first, then `n_points - 1` further solves at
/// evenly spaced target returns up to the largest asset mean, each
/// starting from the previous weights.
pub fn efficient_frontier(problem: &PortfolioProblem, n_points: usize) -> Result<FrontierResult, PortfolioError> {
    efficient_frontier_with(problem, n_points, &SolverOptions::default())
}

pub fn efficient_frontier_with(
    problem: &PortfolioProblem,
    n_points: usize,
    opts: &SolverOptions,
) -> Result<FrontierResult, PortfolioError> {
    if n_points < 2 {
        return Err(PortfolioError::TooFewPoints(n_points));
    }
    let n = problem.n_assets();
    let free = problem.clone().with_target(None);
    let mut start = vec![1.0 / n as f64; n];
    let mut first = min_risk_with(&free, &start, opts)?;
    let mut points = Vec::new();
    for sweep in 0..=MAX_RESWEEPS {
        points = sweep_from(problem, &first, n_points, opts);
        let undercut = points[1..]
            .iter()
            .filter(|p| p.error.is_none() && p.risk < first.risk)
            .min_by(|a, b| a.risk.total_cmp(&b.risk));
        let Some(better) = undercut else { break };
        if sweep == MAX_RESWEEPS {
            break;
        }
        start = better.weights.clone();
        let again = min_risk_with(&free, &start, opts)?;
        if again.risk < first.risk {
            first = again;
        } else {
            // Keep the undercutting portfolio itself as the unconstrained
            // minimum; it is feasible for the free problem.
            let mut s = again;
            s.weights = better.weights.clone();
            s.mean = better.mean;
            s.risk = better.risk;
            first = s;
        }
    }
    Ok(FrontierResult {
        points,
        measure: problem.measure,
        n_points,
        tickers: problem.scenarios.tickers.clone(),
        allow_short: problem.allow_short,
    })
}

fn sweep_from(
    problem: &PortfolioProblem,
    first: &super::PortfolioSolution,
    n_points: usize,
    opts: &SolverOptions,
) -> Vec<FrontierPoint> {
    let top = problem.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let low = first.mean;
    let mut points = vec![FrontierPoint {
        target_return: low,
        mean: first.mean,
        risk: first.risk,
        weights: first.weights.clone(),
        iterations: first.iterations,
        evaluations: first.evaluations,
        converged: first.converged,
        error: None,
    }];
    let mut warm = first.weights.clone();
    for k in 1..n_points {
        let target = if k + 1 == n_points {
            top
        } else {
            low + (top - low) * k as f64 / (n_points - 1) as f64
        };
        let p = problem.clone().with_target(Some(target));
        match min_risk_with(&p, &warm, opts) {
            Ok(s) => {
                warm = s.weights.clone();
                points.push(FrontierPoint {
                    target_return: target,
                    mean: s.mean,
                    risk: s.risk,
                    weights: s.weights,
                    iterations: s.iterations,
                    evaluations: s.evaluations,
                    converged: s.converged,
                    error: None,
                });
            }
            Err(e) => points.push(FrontierPoint {
                target_return: target,
                mean: f64::NAN,
                risk: f64::NAN,
                weights: warm.clone(),
                iterations: 0,
                evaluations: 0,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    points
}
