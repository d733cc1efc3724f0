//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{factor_returns, five_starts, lognormal_start, with_means, Draws};
use lorenz_lab::curves::{analytic_quantile, AnalyticFamily, DEFAULT_GRID, GOLDEN};
use lorenz_lab::data::{
    clean_panel, copula_simulate, load_price_panel, spearman_matrix, CopulaFamily, DroppedTicker, KeptShape,
    ScenarioMatrix,
};
use lorenz_lab::iterate::{
    envelope_violation, fixed_point_residual, limit_curve, limit_value, run_iteration, self_similarity_residual,
    IterationConfig, IterationMode, LimitMode, SelfSimilarity, ENVELOPE_SLACK,
};
use lorenz_lab::lorenz::{lorenz_transform, LorenzCurve};
use lorenz_lab::portfolio::{
    efficient_frontier, grid_oracle, min_risk, portfolio_returns, simplex_grid, PortfolioProblem,
};
use lorenz_lab::risk::{
    cvar_weights, extended_gini, extended_gmd, gini, gmd, gmd_pairwise, gmd_weights, gs_measure, GsVariant,
    RiskKind, RiskMeasureConfig, TargetCurveSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(max_iter: usize, normalize: bool) -> IterationConfig {
    IterationConfig {
        max_iter,
        tol: 0.0,
        normalize,
    }
}

/// Smallest distance over iterations 1..=15 and the distance at 40.
fn convergence(mode: IterationMode, normalize: bool) -> Outcome {
    let t0 = Instant::now();
    let trace = run_iteration(&lognormal_start(DEFAULT_GRID), mode, config(41, normalize)).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let first_below = (1..trace.len()).find(|&i| trace.sup_to_limit[i] < 0.01);
    let at40 = trace.sup_to_limit[40];
    let pass = first_below.is_some_and(|i| i <= 15) && at40 < 1e-4 && secs < 5.0;
    outcome(
        pass,
        format!("below 0.01 at iteration {first_below:?} (need <= 15), distance at 40 = {at40:.3e} (need < 1e-4), {secs:.2}s (need < 5s)"),
    )
}

fn c1() -> Outcome {
    convergence(IterationMode::Primal, false)
}

fn c2() -> Outcome {
    convergence(IterationMode::Reflected, true)
}

fn c3() -> Outcome {
    let mut worst: f64 = 0.0;
    for mode in [IterationMode::Primal, IterationMode::Reflected] {
        let finals: Vec<LorenzCurve> = five_starts(DEFAULT_GRID)
            .iter()
            .map(|(_, q)| {
                let normalize = mode == IterationMode::Reflected;
                run_iteration(q, mode, config(41, normalize)).unwrap().last().clone()
            })
            .collect();
        for i in 0..finals.len() {
            for j in 0..i {
                worst = worst.max(finals[i].curve().sup_distance(finals[j].curve()).unwrap());
            }
        }
    }
    outcome(worst <= 2e-4, format!("max pairwise sup distance at iteration 40 = {worst:.3e} (need <= 2e-4)"))
}

fn c4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for mode in [IterationMode::Primal, IterationMode::Reflected] {
        for (_, q) in five_starts(DEFAULT_GRID) {
            let normalize = mode == IterationMode::Reflected;
            let trace = run_iteration(&q, mode, config(21, normalize)).unwrap();
            for (n, c) in trace.curves.iter().enumerate() {
                worst = worst.max(envelope_violation(c, mode, n));
                checked += 1;
            }
        }
    }
    outcome(
        worst <= ENVELOPE_SLACK,
        format!("{checked} curves, max envelope violation = {worst:.3e} (need <= 1e-6)"),
    )
}

fn c5() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [1.0, 1.5, 2.0, 2.718] {
        let q = analytic_quantile(AnalyticFamily::Power(a), DEFAULT_GRID).unwrap();
        let l = lorenz_transform(&q).unwrap();
        worst = worst.max(l.curve().sup_distance_to(|x| x.powf(1.0 + 1.0 / a)));
    }
    outcome(worst <= 1e-3, format!("max sup error = {worst:.3e} (need <= 1e-3)"))
}

fn c6() -> Outcome {
    let q = analytic_quantile(
        AnalyticFamily::Pareto {
            scale: 1.0,
            shape: 1.0 + GOLDEN,
        },
        65536,
    )
    .unwrap();
    let l = lorenz_transform(&q).unwrap();
    let d = l.curve().sup_distance_to(|x| limit_value(LimitMode::Reflected, x));
    outcome(d <= 5e-3, format!("sup distance to the reflected limit = {d:.3e} (need <= 5e-3)"))
}

fn c7() -> Outcome {
    let primal = limit_curve(LimitMode::Primal, DEFAULT_GRID);
    let reflected = limit_curve(LimitMode::Reflected, DEFAULT_GRID);
    let rp = fixed_point_residual(&primal, IterationMode::Primal).unwrap();
    let rr = fixed_point_residual(&reflected, IterationMode::Reflected).unwrap();
    let down = self_similarity_residual(&primal, SelfSimilarity::Down).epsilon;
    let upper = self_similarity_residual(&reflected, SelfSimilarity::Upper).epsilon;
    let pass = rp <= 1e-3 && rr <= 1e-3 && (down - GOLDEN).abs() <= 1e-3 && (upper - 1.0 / GOLDEN).abs() <= 1e-3;
    outcome(
        pass,
        format!("residuals {rp:.3e} / {rr:.3e} (need <= 1e-3), fitted exponents {down:.6} / {upper:.6}"),
    )
}

fn c8() -> Outcome {
    let mut d = Draws::new(8);
    let mut worst = [0.0f64; 4];
    let mut zero_ok = true;
    for _ in 0..200 {
        let n = 2 + d.below(49) as usize;
        let signed: Vec<f64> = (0..n).map(|_| d.normal() + 0.5).collect();
        let positive: Vec<f64> = (0..n).map(|_| d.normal().exp()).collect();
        worst[0] = worst[0].max((gmd(&signed).unwrap() - gmd_pairwise(&signed).unwrap()).abs());
        worst[1] = worst[1].max((extended_gini(&positive, 2.0).unwrap() - gini(&positive).unwrap()).abs());
        zero_ok &= extended_gini(&positive, 1.0).unwrap() == 0.0;
        let id = TargetCurveSpec::identity();
        worst[2] = worst[2].max((gs_measure(&positive, &id, 2.5).unwrap() - extended_gmd(&positive, 2.5).unwrap()).abs());
        let cw = cvar_weights(n, 0.05 + 0.9 * d.uniform()).unwrap();
        let cw_sum = cw.iter().fold(0.0, |a, w| a + w);
        let gw = gmd_weights(n).unwrap();
        let middle = if n % 2 == 1 { gw[n / 2] } else { 0.0 };
        let gw_sum = (0..n / 2).fold(0.0, |a, j| a + (gw[j] + gw[n - 1 - j])) + middle;
        zero_ok &= cw_sum == -1.0 && gw_sum == 0.0;
    }
    let uniform: Vec<f64> = (0..100_000).map(|_| d.uniform()).collect();
    let g = gini(&uniform).unwrap();
    worst[3] = (g - 1.0 / 3.0).abs();
    let pass = worst[0] <= 1e-12 && worst[1] <= 1e-9 && worst[2] <= 1e-9 && zero_ok && worst[3] <= 2e-3;
    outcome(
        pass,
        format!(
            "gmd routes {:.1e}, egini(2)-gini {:.1e}, gs1(id)-egmd {:.1e}, exact sums/zero {zero_ok}, uniform gini {g:.5}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn c9() -> Outcome {
    let spec = TargetCurveSpec {
        beta_down: 0.25,
        beta_up: 0.75,
        gamma_down_pa: 0.3,
        gamma_down_p: 0.7,
        gamma_up_pa: 0.8,
        gamma_up_p: 0.2,
        variant: GsVariant::Gs1,
    };
    let mut jump: f64 = 0.0;
    for b in [spec.beta_down, spec.beta_up] {
        jump = jump.max((spec.value(b - 1e-14) - spec.value(b + 1e-14)).abs());
    }
    let mut bad_down = TargetCurveSpec::gs2(0.75);
    bad_down.beta_down = 0.1;
    let mut mixed_up = TargetCurveSpec::gs2(0.75);
    mixed_up.gamma_up_pa = 0.5;
    mixed_up.gamma_up_p = 0.5;
    let wrong_variant = RiskMeasureConfig::new(RiskKind::Gs2).with_target(TargetCurveSpec::identity());
    let enforced = bad_down.validate().is_err()
        && mixed_up.validate().is_err()
        && wrong_variant.validate().is_err()
        && TargetCurveSpec::gs2(0.75).validate().is_ok();
    let integral = TargetCurveSpec::identity().integral();
    let pass = jump <= 1e-12 && enforced && integral == 0.5;
    outcome(
        pass,
        format!("junction jump {jump:.1e} (need <= 1e-12), gs2 restrictions enforced {enforced}, identity integral {integral}"),
    )
}

fn three_assets() -> ScenarioMatrix {
    factor_returns(100, 3, 10)
}

fn c10() -> Outcome {
    let t0 = Instant::now();
    let m = three_assets();
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for kind in RiskKind::ALL {
        let p = PortfolioProblem::new(m.clone(), RiskMeasureConfig::new(kind).with_v(2.5)).unwrap();
        let s = min_risk(&p, &[1.0 / 3.0; 3]).unwrap();
        let o = grid_oracle(&p, 0.01, None).unwrap();
        let gap = s.risk - o.risk;
        worst = worst.max(gap);
        lines.push(format!("{}:{gap:+.1e}", kind.name()));
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 60.0,
        format!("solver minus oracle [{}] (need <= 1e-4), {secs:.2}s", lines.join(" ")),
    )
}

fn c11() -> Outcome {
    let mut d = Draws::new(11);
    let rows: Vec<Vec<f64>> = (0..250)
        .map(|_| {
            let z = d.normal();
            vec![0.2 * z + 0.1 * d.normal(), -0.1 * z + 0.3 * d.normal()]
        })
        .collect();
    let m = with_means(rows, &[0.05, 0.12]);
    let cols = [m.column(0), m.column(1)];
    let mu = m.means();
    let t = m.n_scenarios() as f64;
    let cov = |a: &[f64], b: &[f64], ma: f64, mb: f64| a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / t;
    let s11 = cov(&cols[0], &cols[0], mu[0], mu[0]);
    let s22 = cov(&cols[1], &cols[1], mu[1], mu[1]);
    let s12 = cov(&cols[0], &cols[1], mu[0], mu[1]);
    let var_at = |w: f64| w * w * s11 + (1.0 - w) * (1.0 - w) * s22 + 2.0 * w * (1.0 - w) * s12;
    let w_min = ((s22 - s12) / (s11 + s22 - 2.0 * s12)).clamp(0.0, 1.0);

    let p = PortfolioProblem::new(m, RiskMeasureConfig::new(RiskKind::Variance)).unwrap();
    let f = efficient_frontier(&p, 10).unwrap();
    let mut worst = (f.points[0].risk - var_at(w_min)).abs();
    for pt in &f.points[1..] {
        let w = (pt.target_return - mu[1]) / (mu[0] - mu[1]);
        worst = worst.max((pt.risk - var_at(w)).abs());
    }
    let pass = f.points.len() == 10 && worst <= 1e-6;
    outcome(pass, format!("{} points, max deviation from the parabola {worst:.3e} (need <= 1e-6)", f.points.len()))
}

fn c12() -> Outcome {
    let t0 = Instant::now();
    let m = factor_returns(250, 14, 12);
    let p = PortfolioProblem::new(m, RiskMeasureConfig::new(RiskKind::Gs1)).unwrap();
    let f = efficient_frontier(&p, 10).unwrap();
    let budget = f.points.iter().map(|q| (q.weights.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let target = f.points.iter().map(|q| (q.mean - q.target_return).abs()).fold(0.0, f64::max);
    let negative = f.points.iter().flat_map(|q| q.weights.iter()).map(|w| (-w).max(0.0)).fold(0.0, f64::max);
    let first = f.points[0].risk;
    let minimal = f.points.iter().all(|q| q.risk >= first);
    let converged = f.points.iter().filter(|q| q.converged).count();
    let pass = f.points.len() == 10 && budget <= 1e-8 && target <= 1e-6 && negative <= 1e-10 && minimal;
    outcome(
        pass,
        format!(
            "{} points, budget {budget:.1e}, target {target:.1e}, negativity {negative:.1e}, point 1 minimal {minimal}, {converged} converged, {:.1}s",
            f.points.len(),
            t0.elapsed().as_secs_f64()
        ),
    )
}

/// Sample Lorenz polyline at the knots i/T, i = 1..T-1.
fn polyline(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let total: f64 = s.iter().sum();
    let mut acc = 0.0;
    s[..s.len() - 1]
        .iter()
        .map(|x| {
            acc += x;
            acc / total
        })
        .collect()
}

fn c13() -> Outcome {
    let mut d = Draws::new(13);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let z = d.normal();
            vec![0.06 * z + 0.04 * d.normal(), 0.08 * d.normal(), -0.03 * z + 0.09 * d.normal()]
        })
        .collect();
    let m = with_means(rows, &[0.01, 0.02, 0.03]);
    let target = TargetCurveSpec {
        beta_down: 0.25,
        beta_up: 0.75,
        gamma_down_pa: 0.3,
        gamma_down_p: 0.7,
        gamma_up_pa: 0.8,
        gamma_up_p: 0.2,
        variant: GsVariant::Gs1,
    };
    let step = 0.01;
    let t = m.n_scenarios();

    // Dominance: every grid candidate's polyline at or below the target.
    let mut margin = f64::INFINITY;
    for w in simplex_grid(3, step).unwrap() {
        let r = portfolio_returns(&m, &w).unwrap();
        for (i, l) in polyline(&r).iter().enumerate() {
            margin = margin.min(target.value((i + 1) as f64 / t as f64) - l);
        }
    }
    if margin < 0.0 {
        return outcome(false, format!("dominance precondition does not hold (margin {margin:.3e})"));
    }

    let make = |measure: RiskMeasureConfig, goal: f64| {
        PortfolioProblem::new(m.clone(), measure).unwrap().with_target(Some(goal))
    };
    let gs1 = RiskMeasureConfig::new(RiskKind::Gs1).with_target(target).with_v(2.0);
    let gmd_cfg = RiskMeasureConfig::new(RiskKind::Gmd);
    let gs2 = RiskMeasureConfig::new(RiskKind::Gs2).with_v(2.0);
    let mut same = true;
    let mut gs2_gap: f64 = 0.0;
    for goal in [0.012, 0.015, 0.018, 0.02, 0.022, 0.025, 0.028] {
        let a = grid_oracle(&make(gs1, goal), step, Some(1e-12)).unwrap();
        let b = grid_oracle(&make(gmd_cfg, goal), step, Some(1e-12)).unwrap();
        let c = grid_oracle(&make(gs2, goal), step, Some(1e-12)).unwrap();
        same &= a.weights == b.weights;
        let dist = c.weights.iter().zip(&b.weights).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        gs2_gap = gs2_gap.max(dist);
    }
    outcome(
        same && gs2_gap > 0.01,
        format!("dominance margin {margin:.3e}, gs1 and gmd argmins equal {same}, largest gs2-gmd argmin distance {gs2_gap:.3}"),
    )
}

fn ks_distance(history: &[f64], simulated: &[f64]) -> f64 {
    let mut h = history.to_vec();
    let mut s = simulated.to_vec();
    h.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < h.len() {
        let x = h[i];
        while i < h.len() && h[i] <= x {
            i += 1;
        }
        while j < s.len() && s[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / h.len() as f64 - j as f64 / s.len() as f64).abs());
    }
    worst
}

fn c14() -> Outcome {
    let fixture = "date,A,B,C\n\
                   2024-03-01,10,20,\n\
                   2024-03-04,11,21,\n\
                   2024-03-05,12,,5\n\
                   2024-03-06,13,23,6\n\
                   2024-03-07,14,24,7\n";
    let panel = load_price_panel(fixture.as_bytes()).unwrap();
    let (clean, report) = clean_panel(&panel, 0.75).unwrap();
    let dates: Vec<String> = clean.dates.iter().map(|d| d.to_string()).collect();
    let cleaning_ok = report.dropped_tickers
        == vec![DroppedTicker {
            ticker: "C".into(),
            coverage: 0.6,
        }]
        && report.dropped_dates == 1
        && report.kept == KeptShape { t: 4, n: 2 }
        && dates == ["2024-03-01", "2024-03-04", "2024-03-06", "2024-03-07"]
        && clean.tickers == ["A", "B"];

    let history = factor_returns(500, 4, 14);
    let a = copula_simulate(&history, 10_000, 2024, CopulaFamily::Gaussian).unwrap();
    let b = copula_simulate(&history, 10_000, 2024, CopulaFamily::Gaussian).unwrap();
    let ks = (0..4)
        .map(|j| ks_distance(&history.column(j), &a.scenarios.column(j)))
        .fold(0.0, f64::max);
    let sh = spearman_matrix(&history);
    let ss = spearman_matrix(&a.scenarios);
    let mut dev: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            dev = dev.max((sh[i][j] - ss[i][j]).abs());
        }
    }
    let identical = a == b;
    outcome(
        cleaning_ok && ks <= 0.02 && dev <= 0.05 && identical,
        format!("cleaning exact {cleaning_ok}, max KS {ks:.4} (need <= 0.02), Spearman deviation {dev:.4} (need <= 0.05), identical reruns {identical}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("primal convergence to the golden power", c1),
        ("reflected convergence to the Kumaraswamy limit", c2),
        ("universality across five starts", c3),
        ("alpha-power envelopes", c4),
        ("exponent map of power starts", c5),
        ("Pareto parent of the reflected limit", c6),
        ("fixed-point residuals and self-similarity", c7),
        ("risk-measure identities", c8),
        ("target-curve checks", c9),
        ("optimizer versus grid oracle", c10),
        ("two-asset variance frontier", c11),
        ("14-asset frontier contract", c12),
        ("GS1, GMD and GS2 argmins", c13),
        ("data pipeline", c14),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.2}s]",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
