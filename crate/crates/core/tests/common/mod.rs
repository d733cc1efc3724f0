//! Seeded fixtures shared by the integration tests.
#![allow(dead_code)]

use lorenz_lab::curves::{analytic_quantile, empirical_quantile, AnalyticFamily, LognormalScale, QuantileCurve};
use lorenz_lab::data::ScenarioMatrix;
use lorenz_lab::normal;
use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct Draws(Xoshiro256PlusPlus);

impl Draws {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        normal::inverse_cdf(self.uniform())
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }
}

pub fn lognormal_start(grid: usize) -> QuantileCurve {
    analytic_quantile(
        AnalyticFamily::Lognormal {
            mean: 0.5,
            sd: 0.2,
            scale: LognormalScale::Variable,
        },
        grid,
    )
    .unwrap()
}

/// Five different non-negative starting distributions.
pub fn five_starts(grid: usize) -> Vec<(&'static str, QuantileCurve)> {
    let mut d = Draws::new(17);
    let sample: Vec<f64> = (0..500).map(|_| d.uniform().powi(2) * 3.0).collect();
    vec![
        ("uniform", analytic_quantile(AnalyticFamily::Uniform01, grid).unwrap()),
        ("lognormal", lognormal_start(grid)),
        ("power3", analytic_quantile(AnalyticFamily::Power(3.0), grid).unwrap()),
        ("two-atom", empirical_quantile(&[0.2, 0.9], grid).unwrap()),
        ("empirical500", empirical_quantile(&sample, grid).unwrap()),
    ]
}

/// One-factor returns with asset-specific drift and volatility.
pub fn factor_returns(t: usize, n: usize, seed: u64) -> ScenarioMatrix {
    let mut d = Draws::new(seed);
    let rows = (0..t)
        .map(|_| {
            let market = d.normal();
            (0..n)
                .map(|j| {
                    let k = j as f64;
                    0.004 + 0.001 * k + 0.01 * (1.0 + 0.15 * k) * market + 0.015 * d.normal()
                })
                .collect()
        })
        .collect();
    ScenarioMatrix::unlabeled(rows).unwrap()
}

/// Columns re-centred so that their sample means equal `means` up to
/// rounding.
pub fn with_means(mut rows: Vec<Vec<f64>>, means: &[f64]) -> ScenarioMatrix {
    let t = rows.len() as f64;
    for (j, m) in means.iter().enumerate() {
        let current = rows.iter().map(|r| r[j]).sum::<f64>() / t;
        for r in rows.iter_mut() {
            r[j] += m - current;
        }
    }
    ScenarioMatrix::unlabeled(rows).unwrap()
}
