//! Copula scenario simulation with empirical marginals.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, DataWarning, ScenarioMatrix, Source};
use crate::normal;

/// Fewest historical rows accepted for estimation.
pub const MIN_HISTORY: usize = 30;
const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopulaOutput {
    pub scenarios: ScenarioMatrix,
    /// Correlation of the normal scores after projection.
    pub correlation: Vec<Vec<f64>>,
    pub warnings: Vec<DataWarning>,
}

/// Average ranks, 1-based.
fn ranks(column: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; column.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation matrix of columns; a constant column correlates
/// with nothing.
fn pearson(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let d: Vec<f64> = c.iter().map(|x| x - m).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            (d, norm)
        })
        .collect();
    let n = columns.len();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        r[i][i] = 1.0;
        for j in 0..i {
            let (a, na) = &centered[i];
            let (b, nb) = &centered[j];
            let v = if *na > 0.0 && *nb > 0.0 {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (dot / (na * nb)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    r
}

/// Spearman rank correlation between the columns of a scenario matrix.
pub fn spearman_matrix(m: &ScenarioMatrix) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..m.n_assets()).map(|j| ranks(&m.column(j))).collect();
    pearson(&cols)
}

/// Clips eigenvalues at a floor and returns the projected correlation with
/// a factor `B` such that `B B^T` equals it.
fn project(corr: &[Vec<f64>]) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let n = corr.len();
    let a = DMatrix::from_fn(n, n, |i, j| corr[i][j]);
    let eig = SymmetricEigen::new(a);
    let mut factor = eig.eigenvectors.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(EIGEN_FLOOR).sqrt();
        factor.column_mut(k).scale_mut(s);
    }
    for i in 0..n {
        let norm = factor.row(i).norm();
        factor.row_mut(i).scale_mut(1.0 / norm);
    }
    let c = &factor * factor.transpose();
    let projected = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { c[(i, j)] }).collect())
        .collect();
    (projected, factor)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one output row, independent of how rows are scheduled.
fn row_rng(seed: u64, row: usize) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(splitmix64(seed ^ splitmix64(row as u64)))
}

fn open_unit(rng: &mut Xoshiro256PlusPlus) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Worker count from `LORENZ_LAB_THREADS`; 0 or unset means automatic.
fn thread_count() -> usize {
    std::env::var("LORENZ_LAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Draw `n` scenarios whose dependence follows a copula fitted to the
/// history and whose marginals are the historical columns.
pub fn copula_simulate(
    returns: &ScenarioMatrix,
    n: usize,
    seed: u64,
    family: CopulaFamily,
) -> Result<CopulaOutput, DataError> {
    simulate_with_threads(returns, n, seed, family, thread_count())
}

fn simulate_with_threads(
    returns: &ScenarioMatrix,
    n: usize,
    seed: u64,
    family: CopulaFamily,
    threads: usize,
) -> Result<CopulaOutput, DataError> {
    let CopulaFamily::Gaussian = family;
    let t = returns.n_scenarios();
    if t < MIN_HISTORY {
        return Err(DataError::InsufficientHistory {
            needed: MIN_HISTORY,
            got: t,
        });
    }
    let k = returns.n_assets();
    let columns: Vec<Vec<f64>> = (0..k).map(|j| returns.column(j)).collect();
    let warnings = columns
        .iter()
        .zip(&returns.tickers)
        .filter(|(c, _)| c.iter().all(|v| *v == c[0]))
        .map(|(_, ticker)| DataWarning::DegenerateColumn {
            ticker: ticker.clone(),
        })
        .collect();
    let scores: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            ranks(c)
                .into_iter()
                .map(|r| normal::inverse_cdf(r / (t as f64 + 1.0)))
                .collect()
        })
        .collect();
    let (correlation, factor) = project(&pearson(&scores));
    let sorted: Vec<Vec<f64>> = columns
        .into_iter()
        .map(|mut c| {
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();

    let draw = |row: usize| -> Vec<f64> {
        let mut rng = row_rng(seed, row);
        let e: Vec<f64> = (0..k).map(|_| normal::inverse_cdf(open_unit(&mut rng))).collect();
        (0..k)
            .map(|i| {
                let z: f64 = (0..k).map(|j| factor[(i, j)] * e[j]).sum();
                let u = normal::cdf(z);
                let idx = ((u * t as f64).ceil() as usize).clamp(1, t);
                sorted[i][idx - 1]
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DataError::BadMatrix(format!("thread pool: {e}")))?;
    let rows: Vec<Vec<f64>> = pool.install(|| (0..n).into_par_iter().map(draw).collect());

    let mut scenarios = ScenarioMatrix::from_rows(rows, returns.tickers.clone())?;
    scenarios.frequency = returns.frequency;
    scenarios.source = Source::Simulated;
    scenarios.seed = Some(seed);
    Ok(CopulaOutput {
        scenarios,
        correlation,
        warnings,
    })
}
