//! Target Lorenz curves spliced from golden-section tail shapes.

use serde::{Deserialize, Serialize};

use super::RiskError;
use crate::curves::{node, MonotoneCurve, GOLDEN};

/// Which GS measure a target belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GsVariant {
    #[default]
    Gs1,
    Gs2,
}

/// Cut-offs and tail weights of a target curve.
///
/// Below `beta_down` the curve is `gamma_down_pa * kumaraswamy(x) +
/// gamma_down_p * x^golden`, above `beta_up` the same mixture with the up
/// weights, and in between the chord joining the two junction points. The
/// "pa" component is `1 - (1 - x)^(1/golden)`, the "p" component `x^golden`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetCurveSpec {
    pub beta_down: f64,
    pub beta_up: f64,
    pub gamma_down_pa: f64,
    pub gamma_down_p: f64,
    pub gamma_up_pa: f64,
    pub gamma_up_p: f64,
    #[serde(default)]
    pub variant: GsVariant,
}

const WEIGHT_TOL: f64 = 1e-12;

fn kumaraswamy(x: f64) -> f64 {
    1.0 - (1.0 - x).powf(1.0 / GOLDEN)
}

fn power(x: f64) -> f64 {
    x.powf(GOLDEN)
}

/// `int_0^b x^golden`.
fn power_head(b: f64) -> f64 {
    b.powf(GOLDEN + 1.0) / (GOLDEN + 1.0)
}

/// `int_0^b (1 - (1 - x)^c)` with `c = 1/golden`.
fn kumaraswamy_head(b: f64) -> f64 {
    let c = 1.0 / GOLDEN;
    b - (1.0 - (1.0 - b).powf(c + 1.0)) / (c + 1.0)
}

/// `int_b^1 x^golden`.
fn power_tail(b: f64) -> f64 {
    (1.0 - b.powf(GOLDEN + 1.0)) / (GOLDEN + 1.0)
}

/// `int_b^1 (1 - (1 - x)^c)`.
fn kumaraswamy_tail(b: f64) -> f64 {
    let c = 1.0 / GOLDEN;
    (1.0 - b) - (1.0 - b).powf(c + 1.0) / (c + 1.0)
}

impl TargetCurveSpec {
    /// The equality line as a target: no tails, a chord from (0, 0) to (1, 1).
    pub fn identity() -> Self {
        Self {
            beta_down: 0.0,
            beta_up: 1.0,
            gamma_down_pa: 0.0,
            gamma_down_p: 1.0,
            gamma_up_pa: 0.0,
            gamma_up_p: 1.0,
            variant: GsVariant::Gs1,
        }
    }

    /// GS2 target: no down tail, a pure Kumaraswamy up tail above `beta_up`.
    pub fn gs2(beta_up: f64) -> Self {
        Self {
            beta_down: 0.0,
            beta_up,
            gamma_down_pa: 0.0,
            gamma_down_p: 1.0,
            gamma_up_pa: 1.0,
            gamma_up_p: 0.0,
            variant: GsVariant::Gs2,
        }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        let bad = |m: String| Err(RiskError::BadSpec(m));
        let all = [
            self.beta_down,
            self.beta_up,
            self.gamma_down_pa,
            self.gamma_down_p,
            self.gamma_up_pa,
            self.gamma_up_p,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite field".into());
        }
        if !(0.0 <= self.beta_down && self.beta_down < self.beta_up && self.beta_up <= 1.0) {
            return bad(format!(
                "need 0 <= beta_down < beta_up <= 1, got {} and {}",
                self.beta_down, self.beta_up
            ));
        }
        if all[2..].iter().any(|&g| g < 0.0) {
            return bad("tail weights must be non-negative".into());
        }
        if (self.gamma_down_pa + self.gamma_down_p - 1.0).abs() > WEIGHT_TOL {
            return bad("down-tail weights must sum to 1".into());
        }
        if (self.gamma_up_pa + self.gamma_up_p - 1.0).abs() > WEIGHT_TOL {
            return bad("up-tail weights must sum to 1".into());
        }
        if self.variant == GsVariant::Gs2
            && (self.beta_down != 0.0 || self.gamma_up_pa != 1.0 || self.gamma_up_p != 0.0)
        {
            return bad("gs2 requires beta_down = 0 and a pure Kumaraswamy up tail".into());
        }
        if self.down(self.beta_down) > self.up(self.beta_up) {
            return bad("the center chord would decrease".into());
        }
        Ok(())
    }

    fn down(&self, x: f64) -> f64 {
        self.gamma_down_pa * kumaraswamy(x) + self.gamma_down_p * power(x)
    }

    fn up(&self, x: f64) -> f64 {
        self.gamma_up_pa * kumaraswamy(x) + self.gamma_up_p * power(x)
    }

    fn chord(&self, x: f64) -> f64 {
        let (b0, b1) = (self.beta_down, self.beta_up);
        let (y0, y1) = (self.down(b0), self.up(b1));
        y0 + (y1 - y0) * (x - b0) / (b1 - b0)
    }

    /// Curve value; callers validate the target first.
    pub fn value(&self, x: f64) -> f64 {
        if x <= self.beta_down {
            self.down(x)
        } else if x >= self.beta_up {
            self.up(x)
        } else {
            self.chord(x)
        }
    }

    /// `int_0^1 L`, in closed form.
    pub fn integral(&self) -> f64 {
        let (b0, b1) = (self.beta_down, self.beta_up);
        let head = self.gamma_down_pa * kumaraswamy_head(b0) + self.gamma_down_p * power_head(b0);
        let middle = 0.5 * (b1 - b0) * (self.down(b0) + self.up(b1));
        let tail = self.gamma_up_pa * kumaraswamy_tail(b1) + self.gamma_up_p * power_tail(b1);
        head + middle + tail
    }
}

/// A validated target curve sampled on a grid, with its exact integral.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCurve {
    pub spec: TargetCurveSpec,
    pub curve: MonotoneCurve,
    pub integral: f64,
}

pub fn target_curve(spec: TargetCurveSpec, grid: usize) -> Result<TargetCurve, RiskError> {
    spec.validate()?;
    let values = (0..=grid).map(|k| spec.value(node(k, grid))).collect();
    let curve = MonotoneCurve::from_values(values, false)
        .map_err(|e| RiskError::BadSpec(e.to_string()))?;
    Ok(TargetCurve {
        spec,
        curve,
        integral: spec.integral(),
    })
}
