//! Repeated application of the Lorenz operators, the exponent sequence that
//! brackets the iterates, closed-form limits and residual diagnostics.
//!
//! Indexing: trace curve `i` (1-based) is the Lorenz curve produced by the
//! `i`-th application of the operator. Its envelope index is `i - 1`, so the
//! first curve only satisfies `0 <= L <= x` and the exponent bands start with
//! the second curve.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::curves::{node, MonotoneCurve, QuantileCurve, GOLDEN};
use crate::format::g17;
use crate::lorenz::{
    lorenz_of_cdf, lorenz_transform, reflected_of_cdf, reflected_psi, reflected_transform,
    simple_reflect, LorenzCurve, LorenzError,
};

/// Slack allowed when checking envelopes.
pub const ENVELOPE_SLACK: f64 = 1e-6;

/// Consecutive non-improving steps before a run is flagged as stalled.
const STALL_STEPS: usize = 5;

#[derive(Debug, Error)]
pub enum IterateError {
    #[error(transparent)]
    Lorenz(#[from] LorenzError),
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("tolerance must be finite and non-negative, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which operator drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationMode {
    Primal,
    Reflected,
}

/// Which closed-form limit to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    Primal,
    Reflected,
    SimpleReflected,
}

impl From<IterationMode> for LimitMode {
    fn from(m: IterationMode) -> Self {
        match m {
            IterationMode::Primal => LimitMode::Primal,
            IterationMode::Reflected => LimitMode::Reflected,
        }
    }
}

/// `a_1 = 1`, `a_{n+1} = 1 + 1 / a_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSequence {
    terms: Vec<f64>,
}

impl AlphaSequence {
    pub fn new(n: usize) -> Self {
        let mut terms = Vec::with_capacity(n.max(1));
        terms.push(1.0);
        while terms.len() < n {
            let last = terms[terms.len() - 1];
            terms.push(1.0 + 1.0 / last);
        }
        Self { terms }
    }

    /// Term `n`, 1-based.
    pub fn term(&self, n: usize) -> f64 {
        self.terms[n - 1]
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }
}

pub fn alpha_sequence(n: usize) -> AlphaSequence {
    AlphaSequence::new(n)
}

/// Closed-form limit: `x^golden` for the primal operator and
/// `1 - (1 - x)^(1/golden)` for both reflected variants.
pub fn limit_value(mode: LimitMode, x: f64) -> f64 {
    match mode {
        LimitMode::Primal => x.powf(GOLDEN),
        LimitMode::Reflected | LimitMode::SimpleReflected => 1.0 - (1.0 - x).powf(1.0 / GOLDEN),
    }
}

pub fn limit_curve(mode: LimitMode, grid: usize) -> LorenzCurve {
    let values = (0..=grid).map(|k| limit_value(mode, node(k, grid))).collect();
    LorenzCurve::pinned(values, true)
}

/// One operator application to a curve read as a c.d.f. on [0, 1].
pub fn apply_to_cdf(curve: &MonotoneCurve, mode: IterationMode) -> Result<LorenzCurve, LorenzError> {
    match mode {
        IterationMode::Primal => lorenz_of_cdf(curve),
        IterationMode::Reflected => reflected_of_cdf(curve),
    }
}

/// Largest amount by which a curve leaves the exponent band for envelope
/// index `n`. Index 0 only requires `0 <= L(x) <= x`.
pub fn envelope_violation(curve: &LorenzCurve, mode: IterationMode, n: usize) -> f64 {
    let m = curve.grid_size();
    let bounds: Box<dyn Fn(f64) -> (f64, f64)> = if n == 0 {
        Box::new(|x| (0.0, x))
    } else {
        let alpha = AlphaSequence::new(n + 1);
        let (a, b) = (alpha.term(n), alpha.term(n + 1));
        let (lo_exp, hi_exp) = (a.max(b), a.min(b));
        match mode {
            IterationMode::Primal => Box::new(move |x: f64| (x.powf(lo_exp), x.powf(hi_exp))),
            IterationMode::Reflected => Box::new(move |x: f64| {
                (
                    1.0 - (1.0 - x).powf(1.0 / lo_exp),
                    1.0 - (1.0 - x).powf(1.0 / hi_exp),
                )
            }),
        }
    };
    curve
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (lo, hi) = bounds(node(k, m));
            (lo - v).max(v - hi).max(0.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    /// 1-based trace position.
    pub iteration: usize,
    pub max_violation: f64,
    pub ok: bool,
}

/// Non-fatal conditions met during a run.
#[derive(Debug, Clone, PartialEq)]
pub enum IterationWarning {
    /// Successive distances stopped shrinking above the tolerance, at a
    /// level consistent with the grid resolution.
    NoProgress { iteration: usize, level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Divide the start by its maximum before a reflected run.
    pub normalize: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            max_iter: 40,
            tol: 1e-4,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub mode: IterationMode,
    pub curves: Vec<LorenzCurve>,
    pub sup_to_limit: Vec<f64>,
    /// Distance to the previous curve; infinite for the first curve.
    pub sup_successive: Vec<f64>,
    pub envelope: Vec<EnvelopeReport>,
    pub warnings: Vec<IterationWarning>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn last(&self) -> &LorenzCurve {
        self.curves.last().expect("a trace holds at least one curve")
    }

    /// Writes `iteration,sup_to_limit,sup_successive,envelope_ok`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,sup_to_limit,sup_successive,envelope_ok")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                g17(self.sup_to_limit[i]),
                g17(self.sup_successive[i]),
                self.envelope[i].ok
            )?;
        }
        Ok(())
    }

    /// Writes one `curve_NNN.csv` per iteration into `dir`.
    pub fn write_curves(&self, dir: &Path) -> Result<(), IterateError> {
        std::fs::create_dir_all(dir)?;
        for (i, c) in self.curves.iter().enumerate() {
            let file = std::fs::File::create(dir.join(format!("curve_{:03}.csv", i + 1)))?;
            c.curve().write_csv(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

/// Iterates the operator from a starting quantile.
///
/// Stops after `max_iter` curves or once the distance between consecutive
/// curves drops below `tol`.
pub fn run_iteration(
    start: &QuantileCurve,
    mode: IterationMode,
    config: IterationConfig,
) -> Result<IterationTrace, IterateError> {
    if config.max_iter == 0 {
        return Err(IterateError::ZeroIterations);
    }
    if !(config.tol >= 0.0 && config.tol.is_finite()) {
        return Err(IterateError::BadTolerance(config.tol));
    }
    let m = start.grid_size();
    let limit = limit_curve(mode.into(), m);
    // Reflected runs carry psi = simple_reflect(L) and step it with the
    // primal operator; the reported curve is its reflection.
    let first = match mode {
        IterationMode::Primal => lorenz_transform(start)?,
        IterationMode::Reflected => {
            reflected_transform(start, config.normalize)?;
            reflected_psi(start, config.normalize)?
        }
    };
    let report = |state: &LorenzCurve| match mode {
        IterationMode::Primal => state.clone(),
        IterationMode::Reflected => simple_reflect(state),
    };

    let mut trace = IterationTrace {
        mode,
        curves: Vec::with_capacity(config.max_iter),
        sup_to_limit: Vec::with_capacity(config.max_iter),
        sup_successive: Vec::with_capacity(config.max_iter),
        envelope: Vec::with_capacity(config.max_iter),
        warnings: Vec::new(),
    };
    let stall_level = 16.0 / m as f64;
    let mut stalled = 0;
    let mut state = first;
    loop {
        let current = report(&state);
        let i = trace.curves.len() + 1;
        let successive = match trace.curves.last() {
            Some(prev) => prev.curve().sup_distance(current.curve()).expect("same grid"),
            None => f64::INFINITY,
        };
        let violation = envelope_violation(&current, mode, i - 1);
        trace
            .sup_to_limit
            .push(current.curve().sup_distance(limit.curve()).expect("same grid"));
        trace.sup_successive.push(successive);
        trace.envelope.push(EnvelopeReport {
            iteration: i,
            max_violation: violation,
            ok: violation <= ENVELOPE_SLACK,
        });

        if i >= 2 && successive > config.tol {
            let prev = trace.sup_successive[i - 2];
            if successive >= 0.9 * prev && successive <= stall_level {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if stalled == STALL_STEPS && trace.warnings.is_empty() {
                trace.warnings.push(IterationWarning::NoProgress {
                    iteration: i,
                    level: successive,
                });
            }
        }

        let done = successive < config.tol || i >= config.max_iter;
        let next = if done {
            None
        } else {
            Some(lorenz_of_cdf(state.curve())?)
        };
        trace.curves.push(current);
        match next {
            Some(n) => state = n,
            None => break,
        }
    }
    Ok(trace)
}

/// Per-curve envelope reports of a trace.
pub fn envelope_check(trace: &IterationTrace) -> Vec<EnvelopeReport> {
    trace
        .curves
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = envelope_violation(c, trace.mode, i);
            EnvelopeReport {
                iteration: i + 1,
                max_violation: v,
                ok: v <= ENVELOPE_SLACK,
            }
        })
        .collect()
}

/// `sup |op(L) - L|` with `L` read as a c.d.f. on [0, 1].
pub fn fixed_point_residual(curve: &LorenzCurve, mode: IterationMode) -> Result<f64, LorenzError> {
    let image = apply_to_cdf(curve.curve(), mode)?;
    Ok(image.curve().sup_distance(curve.curve())?)
}

/// Which proportionality is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfSimilarity {
    /// `L' = eps (1 - L) / (1 - x)`.
    Upper,
    /// `L' = eps L / x`.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarityFit {
    pub epsilon: f64,
    /// Root-mean-square deviation of the per-segment ratios from `epsilon`.
    pub residual: f64,
}

/// Fits the proportionality factor of a self-similarity relation.
///
/// On each interior segment the relation is integrated exactly: for `Down`,
/// `d ln L = eps d ln x`; for `Upper`, `d ln(1 - L) = eps d ln(1 - x)`. The
/// factor is the least-squares slope of the log increments through the
/// origin. Segments touching the singular endpoint or where the logarithm is
/// undefined are skipped.
pub fn self_similarity_residual(curve: &LorenzCurve, which: SelfSimilarity) -> SelfSimilarityFit {
    let v = curve.values();
    let m = curve.grid_size();
    let mut pairs = Vec::with_capacity(m);
    for k in 0..m {
        let (x0, x1) = (node(k, m), node(k + 1, m));
        let (dy, dx) = match which {
            SelfSimilarity::Down => {
                if k == 0 || v[k] <= 0.0 || v[k + 1] <= 0.0 {
                    continue;
                }
                ((v[k + 1] / v[k]).ln(), (x1 / x0).ln())
            }
            SelfSimilarity::Upper => {
                if k + 1 == m || v[k] >= 1.0 || v[k + 1] >= 1.0 {
                    continue;
                }
                (
                    ((1.0 - v[k + 1]) / (1.0 - v[k])).ln(),
                    ((1.0 - x1) / (1.0 - x0)).ln(),
                )
            }
        };
        if dx != 0.0 && dy.is_finite() {
            pairs.push((dx, dy));
        }
    }
    if pairs.is_empty() {
        return SelfSimilarityFit {
            epsilon: f64::NAN,
            residual: f64::NAN,
        };
    }
    let sxy: f64 = pairs.iter().map(|(dx, dy)| dx * dy).sum();
    let sxx: f64 = pairs.iter().map(|(dx, _)| dx * dx).sum();
    let epsilon = sxy / sxx;
    let ss: f64 = pairs
        .iter()
        .map(|(dx, dy)| {
            let r = dy / dx - epsilon;
            r * r
        })
        .sum();
    SelfSimilarityFit {
        epsilon,
        residual: (ss / pairs.len() as f64).sqrt(),
    }
}
