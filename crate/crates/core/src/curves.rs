//! Monotone functions on [0, 1] sampled on a uniform grid.
//!
//! A [`MonotoneCurve`] stores `M + 1` node values `f(k / M)` and is linearly
//! interpolated between nodes. The same carrier holds quantile functions,
//! Lorenz curves and c.d.f.s restricted to the unit interval. Quantile
//! functions are the canonical representation of a distribution: every
//! operator in this crate consumes `Q = F^{-1}` and its generalized inverse.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::format::g17;
use crate::normal;

/// Default number of grid intervals.
pub const DEFAULT_GRID: usize = 4096;

/// The golden section `(1 + sqrt 5) / 2`.
pub const GOLDEN: f64 = 1.618_033_988_749_894_8;

/// Tolerance used when checking Lorenz endpoints.
pub const ENDPOINT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("a curve needs at least 2 nodes, got {0}")]
    TooShort(usize),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("values decrease at node {index} ({prev} > {value})")]
    NonMonotone { index: usize, prev: f64, value: f64 },
    #[error("argument {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("level {u} lies outside the curve range [{min}, {max}]")]
    OutOfRange { u: f64, min: f64, max: f64 },
    #[error("sample is empty")]
    EmptySample,
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("grid mismatch: {0} vs {1} intervals")]
    GridMismatch(usize, usize),
    #[error("curve csv: {0}")]
    Csv(String),
}

/// Nondecreasing piecewise-linear function on a uniform grid over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCurve {
    values: Vec<f64>,
}

impl MonotoneCurve {
    /// Builds a curve from node values.
    ///
    /// With `rectify` the running maximum of the input is stored, which
    /// removes rounding-level decreases. Without it a decreasing input is an
    /// error.
    pub fn from_values(values: Vec<f64>, rectify: bool) -> Result<Self, CurveError> {
        if values.len() < 2 {
            return Err(CurveError::TooShort(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CurveError::NonFinite(i));
        }
        let mut values = values;
        if rectify {
            rectify_in_place(&mut values);
        } else if let Some(i) = (1..values.len()).find(|&i| values[i] < values[i - 1]) {
            return Err(CurveError::NonMonotone {
                index: i,
                prev: values[i - 1],
                value: values[i],
            });
        }
        Ok(Self { values })
    }

    /// Samples `f` at the `grid + 1` nodes and rectifies the result.
    pub fn from_fn(grid: usize, f: impl Fn(f64) -> f64) -> Result<Self, CurveError> {
        if grid == 0 {
            return Err(CurveError::TooShort(1));
        }
        let values = (0..=grid).map(|k| f(node(k, grid))).collect();
        Self::from_values(values, true)
    }

    pub fn identity(grid: usize) -> Self {
        Self::from_fn(grid, |x| x).expect("identity is monotone")
    }

    /// Number of grid intervals `M`.
    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Abscissa of node `k`.
    pub fn node(&self, k: usize) -> f64 {
        node(k, self.grid_size())
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.grid_size()]
    }

    /// Value at `x` by linear interpolation; exact at nodes.
    pub fn evaluate(&self, x: f64) -> Result<f64, CurveError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CurveError::OutOfDomain(x));
        }
        Ok(self.value_at(x))
    }

    pub(crate) fn value_at(&self, x: f64) -> f64 {
        let (k, t) = locate(x, self.grid_size());
        if t == 0.0 {
            self.values[k]
        } else {
            self.values[k] + t * (self.values[k + 1] - self.values[k])
        }
    }

    /// `inf { y in [0, 1] : f(y) >= u }`.
    ///
    /// On a flat segment at level `u` the left endpoint is returned. With
    /// `clamp`, levels below the range map to 0 and above it to 1.
    pub fn generalized_inverse(&self, u: f64, clamp: bool) -> Result<f64, CurveError> {
        if u.is_nan() {
            return Err(CurveError::OutOfRange {
                u,
                min: self.min(),
                max: self.max(),
            });
        }
        if u < self.min() || u > self.max() {
            if !clamp {
                return Err(CurveError::OutOfRange {
                    u,
                    min: self.min(),
                    max: self.max(),
                });
            }
            return Ok(if u < self.min() { 0.0 } else { 1.0 });
        }
        Ok(self.inverse_unchecked(u))
    }

    pub(crate) fn inverse_unchecked(&self, u: f64) -> f64 {
        let m = self.grid_size();
        let k = self.values.partition_point(|&v| v < u);
        if k == 0 {
            return 0.0;
        }
        if k > m {
            return 1.0;
        }
        let (lo, hi) = (self.values[k - 1], self.values[k]);
        // lo < u <= hi, so the segment is strictly increasing
        let t = ((u - lo) / (hi - lo)).clamp(0.0, 1.0);
        ((k - 1) as f64 + t) / m as f64
    }

    /// Composite-trapezoid integral of the curve over `[0, x]`.
    pub fn prefix_integral(&self, x: f64) -> Result<f64, CurveError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CurveError::OutOfDomain(x));
        }
        let cumulative = self.prefix_integrals();
        Ok(prefix_from_cumulative(self, &cumulative, x))
    }

    /// Trapezoid integrals `int_0^{k/M} f` at every node.
    pub fn prefix_integrals(&self) -> Vec<f64> {
        let h = 1.0 / self.grid_size() as f64;
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Trapezoid integral over [0, 1].
    pub fn integral(&self) -> f64 {
        *self.prefix_integrals().last().expect("non-empty")
    }

    /// Largest absolute node difference against a curve on the same grid.
    pub fn sup_distance(&self, other: &MonotoneCurve) -> Result<f64, CurveError> {
        if self.grid_size() != other.grid_size() {
            return Err(CurveError::GridMismatch(self.grid_size(), other.grid_size()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest absolute node difference against a function.
    pub fn sup_distance_to(&self, f: impl Fn(f64) -> f64) -> f64 {
        let m = self.grid_size();
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| (v - f(node(k, m))).abs())
            .fold(0.0, f64::max)
    }

    /// True when the curve starts at 0 and ends at 1 within [`ENDPOINT_TOL`].
    pub fn is_lorenz_like(&self) -> bool {
        self.min().abs() <= ENDPOINT_TOL && (self.max() - 1.0).abs() <= ENDPOINT_TOL
    }

    /// Writes the `u,value` CSV form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,value")?;
        let m = self.grid_size();
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", g17(node(k, m)), g17(*v))?;
        }
        Ok(())
    }

    /// Reads the `u,value` CSV form. Abscissae must sit on a uniform grid.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, CurveError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| CurveError::Csv("empty input".into()))?
            .map_err(|e| CurveError::Csv(e.to_string()))?;
        if header.trim() != "u,value" {
            return Err(CurveError::Csv(format!("unexpected header {header:?}")));
        }
        let mut us = Vec::new();
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| CurveError::Csv(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (u, v) = line
                .split_once(',')
                .ok_or_else(|| CurveError::Csv(format!("row {}: expected two fields", row + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CurveError::Csv(format!("row {}: {e}", row + 2)))
            };
            us.push(parse(u)?);
            values.push(parse(v)?);
        }
        let m = us.len().saturating_sub(1);
        if m == 0 {
            return Err(CurveError::TooShort(us.len()));
        }
        for (k, u) in us.iter().enumerate() {
            if (u - node(k, m)).abs() > 1e-12 {
                return Err(CurveError::Csv(format!("row {}: u = {u} is not k/M", k + 2)));
            }
        }
        Self::from_values(values, false)
    }
}

/// Running-maximum rectification.
pub fn rectify_in_place(values: &mut [f64]) {
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
}

#[inline]
pub(crate) fn node(k: usize, grid: usize) -> f64 {
    k as f64 / grid as f64
}

/// Segment index and offset of `x`, snapping to nodes within rounding.
pub(crate) fn locate(x: f64, grid: usize) -> (usize, f64) {
    let s = x * grid as f64;
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        let k = r as usize;
        return (k.min(grid), 0.0);
    }
    let k = (s.floor() as usize).min(grid - 1);
    (k, s - k as f64)
}

pub(crate) fn prefix_from_cumulative(curve: &MonotoneCurve, cumulative: &[f64], x: f64) -> f64 {
    let m = curve.grid_size();
    let (k, t) = locate(x, m);
    if t == 0.0 {
        return cumulative[k];
    }
    let h = 1.0 / m as f64;
    let fx = curve.values[k] + t * (curve.values[k + 1] - curve.values[k]);
    cumulative[k] + 0.5 * t * h * (curve.values[k] + fx)
}

/// A quantile function together with its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurve {
    curve: MonotoneCurve,
    mean: f64,
}

impl QuantileCurve {
    pub fn new(curve: MonotoneCurve) -> Self {
        let mean = curve.integral();
        Self { curve, mean }
    }

    pub fn curve(&self) -> &MonotoneCurve {
        &self.curve
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn grid_size(&self) -> usize {
        self.curve.grid_size()
    }

    /// Divides the quantile by its largest value so the support fits [0, 1].
    pub fn normalized_by_max(&self) -> Result<Self, CurveError> {
        let max = self.curve.max();
        if max <= 0.0 {
            return Err(CurveError::BadParameter(format!(
                "cannot normalize a quantile with maximum {max}"
            )));
        }
        let values = self.curve.values.iter().map(|v| v / max).collect();
        Ok(Self::new(MonotoneCurve::from_values(values, true)?))
    }
}

/// How the lognormal parameters are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LognormalScale {
    /// Mean and standard deviation of the variable itself.
    #[default]
    Variable,
    /// Mean and standard deviation of its logarithm.
    Log,
}

/// Analytic starting distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticFamily {
    /// Quantile `p^(1/a)`, i.e. c.d.f. `x^a` on [0, 1].
    Power(f64),
    /// The reflected-iteration limit, c.d.f. `1 - (1 - x)^(1/golden)`.
    KumaraswamyLimit,
    Pareto { scale: f64, shape: f64 },
    Lognormal { mean: f64, sd: f64, scale: LognormalScale },
    Uniform01,
    PointMass(f64),
}

impl AnalyticFamily {
    pub fn validate(&self) -> Result<(), CurveError> {
        let bad = |msg: String| Err(CurveError::BadParameter(msg));
        match *self {
            AnalyticFamily::Power(a) if !(a > 0.0 && a.is_finite()) => {
                bad(format!("power exponent must be positive, got {a}"))
            }
            AnalyticFamily::Pareto { scale, shape } if !(scale > 0.0 && shape > 1.0) => bad(
                format!("pareto needs scale > 0 and shape > 1, got ({scale}, {shape})"),
            ),
            AnalyticFamily::Lognormal { mean, sd, scale } => {
                let ok = match scale {
                    LognormalScale::Variable => mean > 0.0 && sd > 0.0,
                    LognormalScale::Log => mean.is_finite() && sd > 0.0,
                };
                if ok {
                    Ok(())
                } else {
                    bad(format!("lognormal parameters ({mean}, {sd}) are invalid"))
                }
            }
            AnalyticFamily::PointMass(c) if !c.is_finite() => {
                bad(format!("point mass location must be finite, got {c}"))
            }
            _ => Ok(()),
        }
    }

    /// Log-scale `(mu, sigma)` of a lognormal family.
    pub fn lognormal_log_params(mean: f64, sd: f64, scale: LognormalScale) -> (f64, f64) {
        match scale {
            LognormalScale::Variable => {
                let s2 = (1.0 + (sd * sd) / (mean * mean)).ln();
                (mean.ln() - 0.5 * s2, s2.sqrt())
            }
            LognormalScale::Log => (mean, sd),
        }
    }
}

/// Order-statistics quantile `Q(p) = x_(ceil(p n))`, with `Q(0)` the minimum.
pub fn empirical_quantile(samples: &[f64], grid: usize) -> Result<QuantileCurve, CurveError> {
    if samples.is_empty() {
        return Err(CurveError::EmptySample);
    }
    if grid == 0 {
        return Err(CurveError::TooShort(1));
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(CurveError::NonFinite(i));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let values = (0..=grid)
        .map(|k| {
            let rank = (k * n).div_ceil(grid);
            sorted[rank.max(1) - 1]
        })
        .collect();
    Ok(QuantileCurve::new(MonotoneCurve::from_values(values, false)?))
}

/// Samples an analytic quantile function on the grid.
///
/// Families with unbounded support place the last node at `Q(1 - 1/(2M))`.
pub fn analytic_quantile(family: AnalyticFamily, grid: usize) -> Result<QuantileCurve, CurveError> {
    family.validate()?;
    if grid == 0 {
        return Err(CurveError::TooShort(1));
    }
    let last = 1.0 - 0.5 / grid as f64;
    let curve = match family {
        AnalyticFamily::Power(a) => MonotoneCurve::from_fn(grid, |p| p.powf(1.0 / a))?,
        AnalyticFamily::KumaraswamyLimit => {
            MonotoneCurve::from_fn(grid, |p| 1.0 - (1.0 - p).powf(GOLDEN))?
        }
        AnalyticFamily::Uniform01 => MonotoneCurve::identity(grid),
        AnalyticFamily::PointMass(c) => MonotoneCurve::from_fn(grid, |_| c)?,
        AnalyticFamily::Pareto { scale, shape } => MonotoneCurve::from_fn(grid, |p| {
            let p = if p >= 1.0 { last } else { p };
            scale * (1.0 - p).powf(-1.0 / shape)
        })?,
        AnalyticFamily::Lognormal { mean, sd, scale } => {
            let (mu, sigma) = AnalyticFamily::lognormal_log_params(mean, sd, scale);
            MonotoneCurve::from_fn(grid, |p| {
                let p = if p >= 1.0 { last } else { p };
                (mu + sigma * normal::inverse_cdf(p)).exp()
            })?
        }
    };
    Ok(QuantileCurve::new(curve))
}
