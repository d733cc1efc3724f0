mod common;

use chrono::{Datelike, NaiveDate};
use common::{factor_returns, Draws};
use lorenz_lab::data::{
    clean_panel, compute_returns, copula_simulate, load_price_panel, spearman_matrix, CopulaFamily, Frequency,
    ReturnKind, ScenarioMatrix,
};
use proptest::prelude::*;

fn ks(history: &[f64], simulated: &[f64]) -> f64 {
    let mut h = history.to_vec();
    h.sort_by(f64::total_cmp);
    h.dedup();
    h.iter()
        .map(|x| {
            let fh = history.iter().filter(|v| *v <= x).count() as f64 / history.len() as f64;
            let fs = simulated.iter().filter(|v| *v <= x).count() as f64 / simulated.len() as f64;
            (fh - fs).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn single_column_is_a_bootstrap() {
    let h = factor_returns(200, 1, 31);
    let out = copula_simulate(&h, 10_000, 7, CopulaFamily::Gaussian).unwrap();
    assert!(ks(&h.column(0), &out.scenarios.column(0)) <= 0.02);
}

#[test]
fn comonotone_columns_stay_comonotone() {
    let h = factor_returns(200, 1, 32);
    let rows = h.column(0).iter().map(|x| vec![*x, 3.0 * x + 1.0]).collect();
    let h = ScenarioMatrix::unlabeled(rows).unwrap();
    let out = copula_simulate(&h, 10_000, 8, CopulaFamily::Gaussian).unwrap();
    assert!(spearman_matrix(&out.scenarios)[0][1] >= 0.99);
}

#[test]
fn independent_columns_stay_independent() {
    let mut d = Draws::new(33);
    let rows = (0..400).map(|_| vec![d.normal(), d.uniform()]).collect();
    let h = ScenarioMatrix::unlabeled(rows).unwrap();
    let out = copula_simulate(&h, 10_000, 9, CopulaFamily::Gaussian).unwrap();
    assert!(spearman_matrix(&out.scenarios)[0][1].abs() <= 0.05);
}

#[test]
fn spearman_fidelity_on_factor_returns() {
    let h = factor_returns(500, 5, 34);
    let out = copula_simulate(&h, 10_000, 10, CopulaFamily::Gaussian).unwrap();
    let (a, b) = (spearman_matrix(&h), spearman_matrix(&out.scenarios));
    for i in 0..5 {
        for j in 0..5 {
            assert!((a[i][j] - b[i][j]).abs() <= 0.05, "({i}, {j})");
        }
    }
}

#[test]
fn weekly_rows_match_iso_week_count() {
    let monday = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let days = monday
        .iter_days()
        .filter(|d| d.weekday().num_days_from_monday() < 5)
        .take(40);
    let mut text = String::from("date,A\n");
    for (i, d) in days.enumerate() {
        text.push_str(&format!("{d},{}\n", 100.0 + i as f64));
    }
    let p = load_price_panel(text.as_bytes()).unwrap();
    let weekly = compute_returns(&p, Frequency::Weekly, ReturnKind::Simple).unwrap();
    let daily = compute_returns(&p, Frequency::Daily, ReturnKind::Simple).unwrap();
    assert_eq!(daily.n_scenarios(), 39);
    // 40 business days cover 8 ISO weeks.
    assert_eq!(weekly.n_scenarios(), 7);
}

fn sparse_panel() -> impl Strategy<Value = String> {
    (1usize..5, 2usize..25).prop_flat_map(|(n, t)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.85, 1.0f64..100.0), n), t).prop_map(
            move |rows| {
                let mut text = String::from("date");
                for j in 0..n {
                    text.push_str(&format!(",T{j}"));
                }
                text.push('\n');
                for (i, r) in rows.iter().enumerate() {
                    text.push_str(&format!("2023-{:02}-{:02}", 1 + i / 28, 1 + i % 28));
                    for v in r {
                        text.push(',');
                        if let Some(v) = v {
                            text.push_str(&v.to_string());
                        }
                    }
                    text.push('\n');
                }
                text
            },
        )
    })
}

proptest! {
    #[test]
    fn cleaning_invariants(text in sparse_panel(), coverage in 0.5f64..1.0) {
        let panel = load_price_panel(text.as_bytes()).unwrap();
        let Ok((clean, report)) = clean_panel(&panel, coverage) else { return Ok(()) };
        prop_assert!(clean.is_complete());
        prop_assert_eq!(report.kept.t, clean.n_dates());
        prop_assert_eq!(report.kept.n, clean.n_tickers());
        prop_assert_eq!(report.dropped_dates + clean.n_dates(), panel.n_dates());
        for ticker in &clean.tickers {
            let j = panel.tickers.iter().position(|t| t == ticker).unwrap();
            let present = panel.prices.iter().filter(|r| r[j].is_some()).count();
            prop_assert!(present as f64 / panel.n_dates() as f64 >= coverage);
        }
        // Every dropped date misses a quote of some kept ticker.
        for (i, date) in panel.dates.iter().enumerate() {
            if !clean.dates.contains(date) {
                let missing = clean.tickers.iter().any(|t| {
                    let j = panel.tickers.iter().position(|x| x == t).unwrap();
                    panel.prices[i][j].is_none()
                });
                prop_assert!(missing);
            }
        }
    }

    #[test]
    fn simulation_is_deterministic_and_supported(seed in 0u64..1000) {
        let h = factor_returns(40, 3, seed);
        let a = copula_simulate(&h, 200, seed, CopulaFamily::Gaussian).unwrap();
        let b = copula_simulate(&h, 200, seed, CopulaFamily::Gaussian).unwrap();
        prop_assert_eq!(&a, &b);
        for j in 0..3 {
            let col = h.column(j);
            prop_assert!(a.scenarios.column(j).iter().all(|v| col.contains(v)));
        }
    }
}
