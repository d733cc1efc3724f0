//! Scenario-based risk measures.
//!
//! All measures are reported as non-negative loss magnitudes. Sums run
//! left to right over the sorted sample, so results do not depend on the
//! input order.

mod target;

pub use target::{target_curve, GsVariant, TargetCurve, TargetCurveSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("sample is empty")]
    EmptySample,
    #[error("need at least {needed} scenarios, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("tail fraction must lie in (0, 1), got {0}")]
    BadTailFraction(f64),
    #[error("risk aversion v must be >= 1, got {0}")]
    BadAversion(f64),
    #[error("mean must be positive, got {0}")]
    NonPositiveMean(f64),
    #[error("bad target curve: {0}")]
    BadSpec(String),
}

fn sorted(samples: &[f64], needed: usize) -> Result<Vec<f64>, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    if samples.len() < needed {
        return Err(RiskError::InsufficientSample {
            needed,
            got: samples.len(),
        });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(RiskError::NonFinite(i));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

fn mean_of(sorted: &[f64]) -> f64 {
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

fn check_v(v: f64) -> Result<(), RiskError> {
    if v >= 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RiskError::BadAversion(v))
    }
}

/// Population variance (divides by T).
pub fn variance(samples: &[f64]) -> Result<f64, RiskError> {
    let s = sorted(samples, 1)?;
    let mu = mean_of(&s);
    Ok(s.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / s.len() as f64)
}

/// Mean absolute deviation from the mean.
pub fn mad(samples: &[f64]) -> Result<f64, RiskError> {
    let s = sorted(samples, 1)?;
    let mu = mean_of(&s);
    Ok(s.iter().map(|x| (x - mu).abs()).sum::<f64>() / s.len() as f64)
}

/// Order-statistic weights of CVaR at tail fraction `p`.
///
/// With `i = ceil(p n)`, the first `i - 1` weights are `-1/(p n)` and the
/// `i`-th absorbs the remainder so that the left-to-right sum is exactly -1.
pub fn cvar_weights(n: usize, p: f64) -> Result<Vec<f64>, RiskError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(RiskError::BadTailFraction(p));
    }
    if n == 0 {
        return Err(RiskError::EmptySample);
    }
    let pn = p * n as f64;
    let i = (pn.ceil() as usize).clamp(1, n);
    let mut w = vec![0.0; n];
    let mut acc = 0.0;
    for wj in w.iter_mut().take(i - 1) {
        *wj = -1.0 / pn;
        acc += *wj;
    }
    w[i - 1] = -1.0 - acc;
    Ok(w)
}

/// Conditional value at risk: minus the average of the worst `p` fraction.
pub fn cvar(samples: &[f64], p: f64) -> Result<f64, RiskError> {
    let s = sorted(samples, 1)?;
    let w = cvar_weights(s.len(), p)?;
    Ok(w.iter().zip(&s).map(|(w, x)| w * x).sum())
}

fn gmd_numerators(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |j| (2 * j) as f64 - 1.0 - n as f64)
}

/// Order-statistic weights `2 (2j - 1 - n) / (n (n - 1))` of the mean
/// difference.
///
/// The weights are antisymmetric (`w_j = -w_{n+1-j}` bit for bit), so they
/// cancel exactly when summed in pairs from both ends.
pub fn gmd_weights(n: usize) -> Result<Vec<f64>, RiskError> {
    if n < 2 {
        return Err(RiskError::InsufficientSample { needed: 2, got: n });
    }
    let scale = 2.0 / (n as f64 * (n as f64 - 1.0));
    Ok(gmd_numerators(n).map(|k| k * scale).collect())
}

/// Gini mean difference from order statistics.
pub fn gmd(samples: &[f64]) -> Result<f64, RiskError> {
    let s = sorted(samples, 2)?;
    let n = s.len() as f64;
    let weighted: f64 = gmd_numerators(s.len()).zip(&s).map(|(k, x)| k * x).sum();
    Ok(weighted * 2.0 / (n * (n - 1.0)))
}

/// Mean of `|x_i - x_j|` over ordered pairs `i != j`.
pub fn gmd_pairwise(samples: &[f64]) -> Result<f64, RiskError> {
    let s = sorted(samples, 2)?;
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += (s[i] - s[j]).abs();
        }
    }
    Ok(2.0 * total / (n as f64 * (n as f64 - 1.0)))
}

/// Gini index `GMD / (2 mean)`.
pub fn gini(samples: &[f64]) -> Result<f64, RiskError> {
    let s = sorted(samples, 2)?;
    let mu = mean_of(&s);
    if mu <= 0.0 {
        return Err(RiskError::NonPositiveMean(mu));
    }
    Ok(gmd(&s)? / (2.0 * mu))
}

/// Partial sums `S_1..S_n` of the sorted sample.
fn partial_sums(sorted: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    sorted
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// `(1 - i/n)^(v - 2)` at the interior knots `i = 1..n-1`.
fn knot_weight(i: usize, n: usize, v: f64) -> f64 {
    (1.0 - i as f64 / n as f64).powf(v - 2.0)
}

/// Extended Gini `v (v - 1) int (1 - x)^(v-2) (x - L(x)) dx`, summed at the
/// sample knots and scaled by `n / (n - 1)` so that `v = 2` gives [`gini`].
pub fn extended_gini(samples: &[f64], v: f64) -> Result<f64, RiskError> {
    check_v(v)?;
    let s = sorted(samples, 2)?;
    let n = s.len();
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return Err(RiskError::NonPositiveMean(total / n as f64));
    }
    let sums = partial_sums(&s);
    let knots: f64 = (1..n)
        .map(|i| knot_weight(i, n, v) * (i as f64 / n as f64 - sums[i - 1] / total))
        .sum();
    let nf = n as f64;
    Ok(nf / (nf - 1.0) * v * (v - 1.0) * knots / nf)
}

/// Extended mean difference, `2 mean * extended_gini`, computed from
/// partial sums so that it is defined for any sign of the mean.
pub fn extended_gmd(samples: &[f64], v: f64) -> Result<f64, RiskError> {
    check_v(v)?;
    let s = sorted(samples, 2)?;
    let n = s.len();
    let nf = n as f64;
    let mu = mean_of(&s);
    let sums = partial_sums(&s);
    let knots: f64 = (1..n)
        .map(|i| knot_weight(i, n, v) * (mu * i as f64 / nf - sums[i - 1] / nf))
        .sum();
    Ok(2.0 * nf / (nf - 1.0) * v * (v - 1.0) * knots / nf)
}

/// GS measure of a sample against a target curve.
///
/// `scale * T/(T-1) * (mean v (v-1) / int L_target) * (1/T) sum_{i<T}
/// (1 - i/T)^(v-2) |L_hat(i/T) - L_target(i/T)|`, where `L_hat` is the
/// (generalized) Lorenz polyline of the sample for GS1 and of its absolute
/// values for GS2. The `T/(T-1)` factor makes the identity target reproduce
/// [`extended_gmd`].
pub fn gs_measure(samples: &[f64], spec: &TargetCurveSpec, v: f64) -> Result<f64, RiskError> {
    check_v(v)?;
    spec.validate()?;
    let consumed: Vec<f64> = match spec.variant {
        GsVariant::Gs1 => samples.to_vec(),
        GsVariant::Gs2 => samples.iter().map(|x| x.abs()).collect(),
    };
    let s = sorted(&consumed, 2)?;
    let n = s.len();
    let nf = n as f64;
    let total: f64 = s.iter().sum();
    let mu = total / nf;
    if mu <= 0.0 {
        return Err(RiskError::NonPositiveMean(mu));
    }
    let sums = partial_sums(&s);
    let knots: f64 = (1..n)
        .map(|i| {
            let x = i as f64 / nf;
            knot_weight(i, n, v) * (sums[i - 1] / total - spec.value(x)).abs()
        })
        .sum();
    Ok(nf / (nf - 1.0) * mu * v * (v - 1.0) / spec.integral() * knots / nf)
}

/// The plain GS form `2 mean / int L_target * int |L_hat - L_target|`, with
/// the integral taken at the sample knots.
pub fn gs_simple(samples: &[f64], spec: &TargetCurveSpec) -> Result<f64, RiskError> {
    spec.validate()?;
    let consumed: Vec<f64> = match spec.variant {
        GsVariant::Gs1 => samples.to_vec(),
        GsVariant::Gs2 => samples.iter().map(|x| x.abs()).collect(),
    };
    let s = sorted(&consumed, 2)?;
    let n = s.len();
    let nf = n as f64;
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return Err(RiskError::NonPositiveMean(total / nf));
    }
    let sums = partial_sums(&s);
    let area: f64 = (1..n)
        .map(|i| (sums[i - 1] / total - spec.value(i as f64 / nf)).abs())
        .sum::<f64>()
        / (nf - 1.0);
    Ok(2.0 * (total / nf) / spec.integral() * area)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Variance,
    Mad,
    Cvar,
    Gmd,
    ExtendedGini,
    Gs1,
    Gs2,
}

impl RiskKind {
    pub const ALL: [RiskKind; 7] = [
        RiskKind::Variance,
        RiskKind::Mad,
        RiskKind::Cvar,
        RiskKind::Gmd,
        RiskKind::ExtendedGini,
        RiskKind::Gs1,
        RiskKind::Gs2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RiskKind::Variance => "variance",
            RiskKind::Mad => "mad",
            RiskKind::Cvar => "cvar",
            RiskKind::Gmd => "gmd",
            RiskKind::ExtendedGini => "extended_gini",
            RiskKind::Gs1 => "gs1",
            RiskKind::Gs2 => "gs2",
        }
    }

    /// True for measures that need a positive mean of the consumed sample.
    pub fn needs_positive_mean(&self) -> bool {
        matches!(self, RiskKind::ExtendedGini | RiskKind::Gs1 | RiskKind::Gs2)
    }
}

impl std::str::FromStr for RiskKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RiskKind::ALL
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown risk measure {s:?}"))
    }
}

/// A risk measure with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskMeasureConfig {
    pub kind: RiskKind,
    /// Risk aversion for the extended measures.
    pub v: f64,
    /// Tail fraction for CVaR.
    pub tail_fraction: f64,
    /// Target curve for GS measures.
    pub target: Option<TargetCurveSpec>,
    /// Positive multiplier on the measure.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl RiskMeasureConfig {
    pub fn new(kind: RiskKind) -> Self {
        let target = match kind {
            RiskKind::Gs1 => Some(TargetCurveSpec::identity()),
            RiskKind::Gs2 => Some(TargetCurveSpec::gs2(0.75)),
            _ => None,
        };
        Self {
            kind,
            v: 2.5,
            tail_fraction: 0.05,
            target,
            scale: 1.0,
        }
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn with_target(mut self, target: TargetCurveSpec) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_tail_fraction(mut self, p: f64) -> Self {
        self.tail_fraction = p;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(RiskError::BadSpec(format!("scale must be positive, got {}", self.scale)));
        }
        match self.kind {
            RiskKind::Cvar if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) => {
                Err(RiskError::BadTailFraction(self.tail_fraction))
            }
            RiskKind::ExtendedGini => check_v(self.v),
            RiskKind::Gs1 | RiskKind::Gs2 => {
                check_v(self.v)?;
                let spec = self.target.as_ref().ok_or_else(|| {
                    RiskError::BadSpec("gs measures need a target curve".into())
                })?;
                let want = if self.kind == RiskKind::Gs1 {
                    GsVariant::Gs1
                } else {
                    GsVariant::Gs2
                };
                if spec.variant != want {
                    return Err(RiskError::BadSpec(format!(
                        "target variant {:?} does not match measure {}",
                        spec.variant,
                        self.kind.name()
                    )));
                }
                spec.validate()
            }
            _ => Ok(()),
        }
    }

    /// Value of the measure on a sample.
    pub fn evaluate(&self, samples: &[f64]) -> Result<f64, RiskError> {
        self.validate()?;
        let raw = match self.kind {
            RiskKind::Variance => variance(samples)?,
            RiskKind::Mad => mad(samples)?,
            RiskKind::Cvar => cvar(samples, self.tail_fraction)?,
            RiskKind::Gmd => gmd(samples)?,
            RiskKind::ExtendedGini => extended_gini(samples, self.v)?,
            RiskKind::Gs1 | RiskKind::Gs2 => {
                gs_measure(samples, self.target.as_ref().expect("validated"), self.v)?
            }
        };
        Ok(self.scale * raw)
    }

    /// Value plus the context a caller needs to interpret it.
    pub fn report(&self, samples: &[f64]) -> Result<MeasureReport, RiskError> {
        let value = self.evaluate(samples)?;
        let consumed_mean = match self.kind {
            RiskKind::Gs2 => samples.iter().map(|x| x.abs()).sum::<f64>() / samples.len() as f64,
            _ => samples.iter().sum::<f64>() / samples.len() as f64,
        };
        Ok(MeasureReport {
            value,
            mu: consumed_mean,
            integral_target: self.target.filter(|_| matches!(self.kind, RiskKind::Gs1 | RiskKind::Gs2)).map(|t| t.integral()),
            knots: samples.len(),
        })
    }
}

/// Response shape of a measure evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub value: f64,
    pub mu: f64,
    pub integral_target: Option<f64>,
    pub knots: usize,
}
