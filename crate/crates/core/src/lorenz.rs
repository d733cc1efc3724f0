//! Lorenz-type transforms of quantile functions and of c.d.f.s on [0, 1].
//!
//! Two entry points exist for each operator. The quantile forms
//! ([`lorenz_transform`], [`reflected_transform`]) take an arbitrary
//! [`QuantileCurve`]. The c.d.f. forms ([`lorenz_of_cdf`], [`reflected_of_cdf`])
//! treat a grid curve with values in [0, 1] as a distribution function on
//! [0, 1]; this is what the iteration engine feeds back at every step. Both
//! c.d.f. forms integrate the piecewise-linear input exactly, so the only
//! discretization error is the final sampling at the nodes.

use thiserror::Error;

use crate::curves::{node, CurveError, MonotoneCurve, QuantileCurve, ENDPOINT_TOL};

/// Largest tolerated sup-norm gap between the two reflected-transform routes.
pub const ROUTE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LorenzError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("mean must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("quantile starts at {0} < 0; use the generalized curve for signed samples")]
    NegativeSupport(f64),
    #[error("support reaches {0} > 1; normalize by the maximum first")]
    SupportExceedsUnit(f64),
    #[error("curve does not run from (0, 0) to (1, 1)")]
    NotLorenzLike,
    #[error("input is not a distribution function on [0, 1]: {0}")]
    NotDistribution(String),
    #[error("sample total must be positive, got {0}")]
    NonPositiveTotal(f64),
    #[error("fewer than two points survive truncation")]
    DegenerateAfterTruncation,
    #[error("reflected-transform routes disagree by {0}")]
    RouteMismatch(f64),
}

/// A curve pinned at (0, 0) and (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzCurve {
    curve: MonotoneCurve,
    convex: bool,
}

impl LorenzCurve {
    /// Wraps a curve after checking its endpoints; the endpoints are then set
    /// to exactly 0 and 1.
    pub fn new(curve: MonotoneCurve, convex: bool) -> Result<Self, LorenzError> {
        if !curve.is_lorenz_like() {
            return Err(LorenzError::NotLorenzLike);
        }
        Ok(Self::pinned(curve.into_values(), convex))
    }

    pub(crate) fn pinned(mut values: Vec<f64>, convex: bool) -> Self {
        let m = values.len() - 1;
        for v in values.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        values[0] = 0.0;
        values[m] = 1.0;
        let curve = MonotoneCurve::from_values(values, true).expect("finite clamped values");
        Self { curve, convex }
    }

    /// The equality line.
    pub fn identity(grid: usize) -> Self {
        Self {
            curve: MonotoneCurve::identity(grid),
            convex: true,
        }
    }

    /// Samples a closed-form Lorenz curve.
    pub fn from_fn(grid: usize, convex: bool, f: impl Fn(f64) -> f64) -> Result<Self, LorenzError> {
        let curve = MonotoneCurve::from_fn(grid, f)?;
        Self::new(curve, convex)
    }

    pub fn curve(&self) -> &MonotoneCurve {
        &self.curve
    }

    pub fn into_curve(self) -> MonotoneCurve {
        self.curve
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn grid_size(&self) -> usize {
        self.curve.grid_size()
    }

    pub fn values(&self) -> &[f64] {
        self.curve.values()
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, CurveError> {
        self.curve.evaluate(x)
    }

    /// Most negative second difference of the node values.
    pub fn min_second_difference(&self) -> f64 {
        self.values()
            .windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .fold(0.0, f64::min)
    }
}

fn check_quantile(q: &QuantileCurve) -> Result<(), LorenzError> {
    if q.mean() <= 0.0 || !q.mean().is_finite() {
        return Err(LorenzError::NonPositiveMean(q.mean()));
    }
    if q.curve().min() < 0.0 {
        return Err(LorenzError::NegativeSupport(q.curve().min()));
    }
    Ok(())
}

/// `L(x) = int_0^x Q / int_0^1 Q`, trapezoid integration on the grid.
pub fn lorenz_transform(q: &QuantileCurve) -> Result<LorenzCurve, LorenzError> {
    check_quantile(q)?;
    let cumulative = q.curve().prefix_integrals();
    let total = cumulative[cumulative.len() - 1];
    let values = cumulative.iter().map(|c| c / total).collect();
    Ok(LorenzCurve::pinned(values, true))
}

/// Reflected Lorenz curve `1 - phi^{-1}(x)` with
/// `phi(y) = E[min(X, 1 - y)] / E[X]` and `phi^{-1}(u) = inf { y : phi(y) <= u }`.
///
/// The support must lie in [0, 1] unless `normalize` is set, in which case
/// the quantile is first divided by its maximum. The result is computed
/// twice, once from `phi` and once from the Lorenz curve of
/// `1 - Q^{-1}(1 - s)` reflected back; the two must agree to [`ROUTE_TOL`].
pub fn reflected_transform(q: &QuantileCurve, normalize: bool) -> Result<LorenzCurve, LorenzError> {
    let (direct, via_psi) = reflected_transform_routes(q, normalize)?;
    let gap = direct.curve().sup_distance(via_psi.curve())?;
    if gap > ROUTE_TOL {
        return Err(LorenzError::RouteMismatch(gap));
    }
    Ok(direct)
}

/// Both evaluations behind [`reflected_transform`], unchecked against each
/// other.
pub fn reflected_transform_routes(
    q: &QuantileCurve,
    normalize: bool,
) -> Result<(LorenzCurve, LorenzCurve), LorenzError> {
    let scaled;
    let q = if normalize && q.curve().max() > 1.0 + 1e-9 {
        scaled = q.normalized_by_max()?;
        &scaled
    } else {
        q
    };
    check_quantile(q)?;
    if q.curve().max() > 1.0 + 1e-9 {
        return Err(LorenzError::SupportExceedsUnit(q.curve().max()));
    }
    let m = q.grid_size();
    let mean = q.mean();
    let qc = q.curve();
    let cumulative = qc.prefix_integrals();

    // phi at the nodes y_j, from E[min(X, t)] = int_0^{p*} Q + t (1 - p*)
    let mut phi: Vec<f64> = (0..=m)
        .map(|j| {
            let t = 1.0 - node(j, m);
            let p = qc.generalized_inverse(t, true).expect("clamped");
            let head = crate::curves::prefix_from_cumulative(qc, &cumulative, p);
            (head + t * (1.0 - p)) / mean
        })
        .collect();
    // phi is nonincreasing; remove rounding-level increases
    for j in 1..phi.len() {
        if phi[j] > phi[j - 1] {
            phi[j] = phi[j - 1];
        }
    }
    let direct: Vec<f64> = (0..=m)
        .map(|k| 1.0 - inverse_nonincreasing(&phi, node(k, m)))
        .collect();

    let via_psi = simple_reflect(&psi_curve(q));

    Ok((LorenzCurve::pinned(direct, true), via_psi))
}

/// The curve `psi = 1 - phi` of a quantile with support in [0, 1]: the
/// Lorenz curve of `c(s) = 1 - Q^{-1}(1 - s)`, whose simple reflection is the
/// reflected Lorenz curve. Iterating the primal operator on `psi` is
/// equivalent to iterating the reflected operator on its reflection.
///
/// Normalization and support rules follow [`reflected_transform`].
pub fn reflected_psi(q: &QuantileCurve, normalize: bool) -> Result<LorenzCurve, LorenzError> {
    let scaled;
    let q = if normalize && q.curve().max() > 1.0 + 1e-9 {
        scaled = q.normalized_by_max()?;
        &scaled
    } else {
        q
    };
    check_quantile(q)?;
    if q.curve().max() > 1.0 + 1e-9 {
        return Err(LorenzError::SupportExceedsUnit(q.curve().max()));
    }
    Ok(psi_curve(q))
}

// integrals of G = clamped Q^{-1} come from Young's identity, exact for
// piecewise-linear Q
fn psi_curve(q: &QuantileCurve) -> LorenzCurve {
    let m = q.grid_size();
    let mean = q.mean();
    let qc = q.curve();
    let cumulative = qc.prefix_integrals();
    let q0 = qc.min();
    let q1 = qc.max();
    let int_g = |a: f64| -> f64 {
        if a <= q0 {
            0.0
        } else if a <= q1 {
            let p = qc.generalized_inverse(a, true).expect("clamped");
            a * p - crate::curves::prefix_from_cumulative(qc, &cumulative, p)
        } else {
            (q1 - mean) + (a - q1)
        }
    };
    let int_g_total = int_g(1.0);
    let c_total = 1.0 - int_g_total;
    let values = (0..=m)
        .map(|k| {
            let s = node(k, m);
            (s - (int_g_total - int_g(1.0 - s))) / c_total
        })
        .collect();
    LorenzCurve::pinned(values, true)
}

/// `inf { y : phi(y) <= u }` for node samples of a nonincreasing function.
fn inverse_nonincreasing(phi: &[f64], u: f64) -> f64 {
    let m = phi.len() - 1;
    let j = phi.partition_point(|&v| v > u);
    if j == 0 {
        return 0.0;
    }
    if j > m {
        return 1.0;
    }
    let (hi, lo) = (phi[j - 1], phi[j]);
    let t = ((hi - u) / (hi - lo)).clamp(0.0, 1.0);
    ((j - 1) as f64 + t) / m as f64
}

/// `1 - L^{-1}(1 - x)` at every node.
pub fn simple_reflect(l: &LorenzCurve) -> LorenzCurve {
    let c = l.curve();
    let m = c.grid_size();
    let values = (0..=m)
        .map(|k| 1.0 - c.inverse_unchecked(1.0 - node(k, m)))
        .collect();
    LorenzCurve::pinned(values, l.is_convex())
}

/// `1 - L(1 - x)`, evaluated node by node. Applying it twice returns the
/// input up to one rounding of `1 - v`, i.e. within `f64::EPSILON`.
pub fn dual_curve(l: &LorenzCurve) -> MonotoneCurve {
    let v = l.values();
    let m = v.len() - 1;
    let values = (0..=m).map(|k| 1.0 - v[m - k]).collect();
    MonotoneCurve::from_values(values, true).expect("reflection of a monotone curve")
}

fn check_cdf(f: &MonotoneCurve) -> Result<(), LorenzError> {
    if f.min() < -ENDPOINT_TOL || f.min() > 1.0 {
        return Err(LorenzError::NotDistribution(format!(
            "starts at {}",
            f.min()
        )));
    }
    if (f.max() - 1.0).abs() > ENDPOINT_TOL {
        return Err(LorenzError::NotDistribution(format!("ends at {}", f.max())));
    }
    Ok(())
}

/// Lorenz curve of the distribution whose c.d.f. on [0, 1] is `f`.
///
/// With `y = f^{-1}(x)`, `int_0^x f^{-1} = x y - int_0^y f`, which is exact
/// for the piecewise-linear `f`; the mean is `1 - int_0^1 f`.
pub fn lorenz_of_cdf(f: &MonotoneCurve) -> Result<LorenzCurve, LorenzError> {
    check_cdf(f)?;
    let m = f.grid_size();
    let cumulative = f.prefix_integrals();
    let mean = 1.0 - cumulative[m];
    if mean <= 0.0 {
        return Err(LorenzError::NonPositiveMean(mean));
    }
    let values = (0..=m)
        .map(|k| {
            let x = node(k, m);
            let y = f.inverse_unchecked(x);
            (x * y - crate::curves::prefix_from_cumulative(f, &cumulative, y)) / mean
        })
        .collect();
    Ok(LorenzCurve::pinned(values, true))
}

/// Reflected Lorenz curve of the distribution whose c.d.f. on [0, 1] is `f`.
///
/// With `g(t) = int_0^t (1 - f) = t - int_0^t f`, the curve is
/// `sup { t : g(t) <= mean * x }`. `g` is piecewise quadratic, so each node
/// is a closed-form root.
pub fn reflected_of_cdf(f: &MonotoneCurve) -> Result<LorenzCurve, LorenzError> {
    check_cdf(f)?;
    let m = f.grid_size();
    let h = 1.0 / m as f64;
    let cumulative = f.prefix_integrals();
    let v = f.values();
    let g: Vec<f64> = (0..=m).map(|j| node(j, m) - cumulative[j]).collect();
    let mean = g[m];
    if mean <= 0.0 {
        return Err(LorenzError::NonPositiveMean(mean));
    }
    let mut values = Vec::with_capacity(m + 1);
    values.push(0.0);
    for k in 1..m {
        let target = mean * node(k, m);
        // first node with g > target; the root lies in the segment before it
        let j = g.partition_point(|&gv| gv <= target);
        let t = if j == 0 {
            0.0
        } else if j > m {
            1.0
        } else {
            let a = v[j - 1];
            let slope = (v[j] - a) / h;
            let d = (target - g[j - 1]).max(0.0);
            let lin = 1.0 - a;
            let disc = (lin * lin - 2.0 * slope * d).max(0.0);
            // stable root of (slope/2) s^2 - lin s + d = 0
            let denom = lin + disc.sqrt();
            let s = if denom > 0.0 { 2.0 * d / denom } else { 0.0 };
            node(j - 1, m) + s.clamp(0.0, h)
        };
        values.push(t);
    }
    values.push(1.0);
    Ok(LorenzCurve::pinned(values, true))
}

/// How a signed generalized Lorenz curve is cut back to a classical one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruncationMode {
    /// Keep the rising branch from the minimum point on.
    #[default]
    IncreasingSection,
    /// Keep the rising branch and drop its negative part.
    PositiveIncreasing,
}

/// Partial-sum curve of a sample that may contain negative values.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedLorenzPoints {
    /// `(i / n, S_i / S_n)` for `i = 1..=n`; the origin is implicit.
    pub points: Vec<(f64, f64)>,
    /// Index into `points` of the first non-negative point after the curve
    /// has dipped below zero.
    pub sign_change_index: Option<usize>,
}

/// Sorted partial sums over the total.
pub fn generalized_lorenz(samples: &[f64]) -> Result<GeneralizedLorenzPoints, LorenzError> {
    if samples.is_empty() {
        return Err(CurveError::EmptySample.into());
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(CurveError::NonFinite(i).into());
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(LorenzError::NonPositiveTotal(total));
    }
    let n = sorted.len();
    let mut acc = 0.0;
    let mut points = Vec::with_capacity(n);
    for (i, x) in sorted.iter().enumerate() {
        acc += x;
        let y = if i + 1 == n { 1.0 } else { acc / total };
        points.push(((i + 1) as f64 / n as f64, y));
    }
    let first_negative = points.iter().position(|p| p.1 < 0.0);
    let sign_change_index =
        first_negative.and_then(|f| (f..n).find(|&i| points[i].1 >= 0.0));
    Ok(GeneralizedLorenzPoints {
        points,
        sign_change_index,
    })
}

/// Cuts a generalized curve back to its rising part, rescales it affinely
/// onto (0, 0)-(1, 1) and resamples it on a grid with `grid` intervals.
pub fn truncate_generalized(
    points: &GeneralizedLorenzPoints,
    mode: TruncationMode,
    grid: usize,
) -> Result<LorenzCurve, LorenzError> {
    let mut poly = Vec::with_capacity(points.points.len() + 1);
    poly.push((0.0, 0.0));
    poly.extend_from_slice(&points.points);
    // first minimum, so a leading flat stretch at zero is kept
    let start = poly
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.1 < poly[best].1 { i } else { best });
    let mut kept: Vec<(f64, f64)> = poly[start..].to_vec();
    if mode == TruncationMode::PositiveIncreasing {
        kept.retain(|p| p.1 >= 0.0);
    }
    if kept.len() < 2 {
        return Err(LorenzError::DegenerateAfterTruncation);
    }
    let (x0, y0) = kept[0];
    let (x1, y1) = kept[kept.len() - 1];
    if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
        return Err(LorenzError::DegenerateAfterTruncation);
    }
    let xs: Vec<f64> = kept.iter().map(|p| (p.0 - x0) / (x1 - x0)).collect();
    let ys: Vec<f64> = kept.iter().map(|p| (p.1 - y0) / (y1 - y0)).collect();
    if grid == 0 {
        return Err(CurveError::TooShort(1).into());
    }
    let values = (0..=grid)
        .map(|k| {
            let x = node(k, grid);
            let i = xs.partition_point(|&v| v < x);
            if i == 0 {
                ys[0]
            } else if i >= xs.len() {
                ys[ys.len() - 1]
            } else {
                let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                ys[i - 1] + t * (ys[i] - ys[i - 1])
            }
        })
        .collect();
    Ok(LorenzCurve::pinned(values, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{analytic_quantile, AnalyticFamily, DEFAULT_GRID, GOLDEN};
    use proptest::prelude::*;

    fn quantile(f: AnalyticFamily, m: usize) -> QuantileCurve {
        analytic_quantile(f, m).unwrap()
    }

    #[test]
    fn uniform_gives_square() {
        let l = lorenz_transform(&quantile(AnalyticFamily::Uniform01, DEFAULT_GRID)).unwrap();
        assert!((l.evaluate(0.5).unwrap() - 0.25).abs() < 1e-6);
        assert!(l.curve().sup_distance_to(|x| x * x) < 1e-6);
    }

    #[test]
    fn point_mass_gives_equality_line() {
        let l = lorenz_transform(&quantile(AnalyticFamily::PointMass(3.0), 64)).unwrap();
        assert!(l.curve().sup_distance_to(|x| x) < 1e-15);
    }

    #[test]
    fn rejects_bad_quantiles() {
        let zero = quantile(AnalyticFamily::PointMass(0.0), 8);
        assert!(matches!(
            lorenz_transform(&zero),
            Err(LorenzError::NonPositiveMean(_))
        ));
        let signed = QuantileCurve::new(
            MonotoneCurve::from_values(vec![-1.0, 0.0, 3.0], false).unwrap(),
        );
        assert!(matches!(
            lorenz_transform(&signed),
            Err(LorenzError::NegativeSupport(_))
        ));
    }

    #[test]
    fn pareto_parent_of_reflected_limit() {
        let q = quantile(
            AnalyticFamily::Pareto {
                scale: 1.0,
                shape: 1.0 + GOLDEN,
            },
            65_536,
        );
        let l = lorenz_transform(&q).unwrap();
        let gap = l.curve().sup_distance_to(|x| 1.0 - (1.0 - x).powf(1.0 / GOLDEN));
        assert!(gap <= 5e-3, "gap {gap}");
    }

    #[test]
    fn exponent_map() {
        for a in [1.0, 1.5, 2.0, 2.718, 3.0] {
            let l = lorenz_transform(&quantile(AnalyticFamily::Power(a), DEFAULT_GRID)).unwrap();
            let gap = l.curve().sup_distance_to(|x| x.powf(1.0 + 1.0 / a));
            assert!(gap <= 1e-3, "a = {a}: gap {gap}");
        }
    }

    #[test]
    fn reflected_of_uniform() {
        let q = quantile(AnalyticFamily::Uniform01, DEFAULT_GRID);
        let l = reflected_transform(&q, false).unwrap();
        let expected = 1.0 - 0.5f64.sqrt();
        assert!((l.evaluate(0.5).unwrap() - expected).abs() < 1e-5);
        assert!(l.curve().sup_distance_to(|x| 1.0 - (1.0 - x).sqrt()) < 1e-3);
    }

    #[test]
    fn reflected_of_point_mass_one() {
        let l = reflected_transform(&quantile(AnalyticFamily::PointMass(1.0), 128), false).unwrap();
        assert!(l.curve().sup_distance_to(|x| x) < 1e-12);
    }

    #[test]
    fn reflected_limit_is_fixed() {
        let q = quantile(AnalyticFamily::KumaraswamyLimit, DEFAULT_GRID);
        let l = reflected_transform(&q, false).unwrap();
        let gap = l.curve().sup_distance_to(|x| 1.0 - (1.0 - x).powf(1.0 / GOLDEN));
        assert!(gap <= 1e-3, "gap {gap}");
    }

    #[test]
    fn reflected_support_check() {
        let q = quantile(AnalyticFamily::PointMass(2.0), 16);
        assert!(matches!(
            reflected_transform(&q, false),
            Err(LorenzError::SupportExceedsUnit(_))
        ));
        let l = reflected_transform(&q, true).unwrap();
        assert!(l.curve().sup_distance_to(|x| x) < 1e-12);
    }

    #[test]
    fn reflected_routes_agree_on_lognormal() {
        let q = quantile(
            AnalyticFamily::Lognormal {
                mean: 0.5,
                sd: 0.2,
                scale: crate::curves::LognormalScale::Variable,
            },
            DEFAULT_GRID,
        );
        let (a, b) = reflected_transform_routes(&q, true).unwrap();
        assert!(a.curve().sup_distance(b.curve()).unwrap() <= ROUTE_TOL);
    }

    #[test]
    fn cdf_forms_match_quantile_forms() {
        // uniform on [0, 1] as a c.d.f. is the identity
        let id = MonotoneCurve::identity(DEFAULT_GRID);
        let p = lorenz_of_cdf(&id).unwrap();
        assert!(p.curve().sup_distance_to(|x| x * x) < 1e-12);
        let r = reflected_of_cdf(&id).unwrap();
        assert!(r.curve().sup_distance_to(|x| 1.0 - (1.0 - x).sqrt()) < 1e-12);
        let q = quantile(AnalyticFamily::Uniform01, DEFAULT_GRID);
        let r2 = reflected_transform(&q, false).unwrap();
        assert!(r.curve().sup_distance(r2.curve()).unwrap() < 1e-6);
    }

    #[test]
    fn simple_reflect_examples() {
        let id = LorenzCurve::identity(64);
        assert_eq!(simple_reflect(&id), id);
        let sq = LorenzCurve::from_fn(DEFAULT_GRID, true, |x| x * x).unwrap();
        let r = simple_reflect(&sq);
        assert!((r.evaluate(0.75).unwrap() - 0.5).abs() < 1e-6);
        let lim = LorenzCurve::from_fn(DEFAULT_GRID, true, |x| x.powf(GOLDEN)).unwrap();
        let r = simple_reflect(&lim);
        assert!(r.curve().sup_distance_to(|x| 1.0 - (1.0 - x).powf(1.0 / GOLDEN)) < 1e-3);
    }

    #[test]
    fn dual_examples() {
        let sq = LorenzCurve::from_fn(8, true, |x| x * x).unwrap();
        let d = dual_curve(&sq);
        assert!((d.evaluate(0.5).unwrap() - 0.75).abs() < 1e-15);
        let lim = LorenzCurve::from_fn(DEFAULT_GRID, true, |x| x.powf(GOLDEN)).unwrap();
        let twice = dual_curve(&LorenzCurve::new(dual_curve(&lim), false).unwrap());
        let gap = twice.sup_distance(lim.curve()).unwrap();
        assert!(gap <= f64::EPSILON, "gap {gap}");
        // values in [0.5, 1] survive the round trip bit for bit
        let m = lim.grid_size();
        assert_eq!(twice.values()[m], lim.values()[m]);
        assert_eq!(twice.values()[m - 1], lim.values()[m - 1]);
        let id = LorenzCurve::identity(16);
        assert_eq!(&dual_curve(&id), id.curve());
    }

    #[test]
    fn generalized_examples() {
        let g = generalized_lorenz(&[1.0; 4]).unwrap();
        for (k, p) in g.points.iter().enumerate() {
            assert_eq!(*p, ((k + 1) as f64 / 4.0, (k + 1) as f64 / 4.0));
        }
        let g = generalized_lorenz(&[-1.0, 3.0]).unwrap();
        assert_eq!(g.points, vec![(0.5, -0.5), (1.0, 1.0)]);
        assert_eq!(g.sign_change_index, Some(1));
        let g = generalized_lorenz(&[2.0, 1.0, 3.0]).unwrap();
        let want = [(1.0 / 3.0, 1.0 / 6.0), (2.0 / 3.0, 0.5), (1.0, 1.0)];
        for (p, w) in g.points.iter().zip(want) {
            assert!((p.0 - w.0).abs() < 1e-15 && (p.1 - w.1).abs() < 1e-15);
        }
        assert_eq!(g.sign_change_index, None);
        assert!(matches!(
            generalized_lorenz(&[-2.0, 1.0]),
            Err(LorenzError::NonPositiveTotal(_))
        ));
    }

    #[test]
    fn truncation_examples() {
        let g = generalized_lorenz(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let l = truncate_generalized(&g, TruncationMode::IncreasingSection, 4).unwrap();
        let expect = [0.0, 0.1, 0.3, 0.6, 1.0];
        for (a, b) in l.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let g = generalized_lorenz(&[-1.0, 3.0]).unwrap();
        let l = truncate_generalized(&g, TruncationMode::IncreasingSection, 10).unwrap();
        // the (0.5, -0.5) -> (1, 1) branch rescales onto the diagonal
        assert!(l.curve().sup_distance_to(|x| x) < 1e-15);

        let g = generalized_lorenz(&[-1.0, -1.0, 5.0]).unwrap();
        assert_eq!(
            truncate_generalized(&g, TruncationMode::PositiveIncreasing, 8),
            Err(LorenzError::DegenerateAfterTruncation)
        );
        assert!(truncate_generalized(&g, TruncationMode::IncreasingSection, 8).is_ok());
    }

    #[test]
    fn simple_reflect_involution_on_smooth_curves() {
        let m = 65_536;
        for w in [0.0, 0.1, 0.3, 0.5] {
            let l = LorenzCurve::from_fn(m, true, |x| (1.0 - w) * x + w * x * x).unwrap();
            let back = simple_reflect(&simple_reflect(&l));
            let gap = back.curve().sup_distance(l.curve()).unwrap();
            assert!(gap <= 1e-9, "w = {w}: gap {gap}");
        }
    }

    fn convex_curve() -> impl Strategy<Value = LorenzCurve> {
        // random convex polyline: positive increasing slopes
        prop::collection::vec(0.01f64..1.0, 4..64).prop_map(|mut slopes| {
            slopes.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            let mut values = vec![0.0];
            for s in &slopes {
                acc += s;
                values.push(acc);
            }
            let total = acc;
            let values = values.iter().map(|v| v / total).collect();
            LorenzCurve::new(MonotoneCurve::from_values(values, true).unwrap(), true).unwrap()
        })
    }

    fn power_quantile() -> impl Strategy<Value = QuantileCurve> {
        (0.3f64..4.0).prop_map(|a| quantile(AnalyticFamily::Power(a), 512))
    }

    proptest! {
        #[test]
        fn sandwich_and_convexity(q in power_quantile()) {
            let l = lorenz_transform(&q).unwrap();
            for (k, v) in l.values().iter().enumerate() {
                let x = l.curve().node(k);
                prop_assert!(*v >= 0.0 && *v <= x + 1e-10);
            }
            prop_assert!(l.min_second_difference() >= -1e-10);
        }

        #[test]
        fn subhomogeneity(l in convex_curve()) {
            for i in 0..50 {
                for j in 0..50 {
                    let x = i as f64 / 49.0;
                    let y = j as f64 / 49.0;
                    let lhs = l.evaluate(x * y).unwrap();
                    let rhs = x * l.evaluate(y).unwrap();
                    prop_assert!(lhs <= rhs + 1e-9);
                }
            }
        }

        #[test]
        fn transforms_are_subhomogeneous(q in power_quantile()) {
            let outs = [
                lorenz_transform(&q).unwrap(),
                reflected_transform(&q, false).unwrap(),
            ];
            for l in outs {
                for i in 0..50 {
                    for j in 0..50 {
                        let x = i as f64 / 49.0;
                        let y = j as f64 / 49.0;
                        prop_assert!(l.evaluate(x * y).unwrap() <= x * l.evaluate(y).unwrap() + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn slope_sandwich(q in power_quantile()) {
            let l = lorenz_transform(&q).unwrap();
            let v = l.values();
            let m = l.grid_size();
            let h = 1.0 / m as f64;
            for k in 1..m - 1 {
                let (xk, xk1) = (k as f64 * h, (k + 1) as f64 * h);
                let s = (v[k + 1] - v[k]) / h;
                prop_assert!(s >= v[k] / xk - 1e-6);
                prop_assert!(s <= (1.0 - v[k + 1]) / (1.0 - xk1) + 1e-6);
            }
        }

        #[test]
        fn reflected_routes_agree(q in power_quantile()) {
            let (a, b) = reflected_transform_routes(&q, false).unwrap();
            prop_assert!(a.curve().sup_distance(b.curve()).unwrap() <= ROUTE_TOL);
        }

        #[test]
        fn dual_is_involution(l in convex_curve()) {
            let once = LorenzCurve::new(dual_curve(&l), false).unwrap();
            let twice = dual_curve(&once);
            prop_assert!(twice.sup_distance(l.curve()).unwrap() <= f64::EPSILON);
        }
    }
}
