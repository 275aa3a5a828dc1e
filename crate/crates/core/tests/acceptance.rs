//! End-to-end acceptance gate: one check per shipped guarantee, each
//! emitting a single PASS/FAIL line (visible with `--nocapture` or on
//! failure). The checks pair the stochastic simulator against exact
//! finite-volume linear algebra, and the momentum-space hierarchy against
//! its closed-form and scalar-model oracles.

use std::sync::Arc;

use asep2d::hierarchy::{
    k_integral, resolvent_degree_two_diagonal, resolvent_truncated, verify_main_estimate_sandwich,
    KIntegralSpec, NestedResolventSpec,
};
use asep2d::lattice::DynamicsMode;
use asep2d::momentum::{Grid1d, Grid2d};
use asep2d::observables::{
    diffusivity_green_kubo, jackknife, laplace_transform_d, measure_current_integral,
    measure_structure_function, normalized_current_variance, velocity_from_first_moment,
    CurrentIntegral, DiffusivityCurve, SimParams,
};
use asep2d::oracle::build_generator;
use asep2d::scaling::{fit_log_power, iterate_kappa, kappa_schedule, rational_to_f64};

fn verdict(idx: usize, name: &str, ok: bool, detail: &str) {
    println!("[acceptance {idx}/10] {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "acceptance {idx} {name}: {detail}");
}

/// 1. Uniform fixed-count measure is exactly stationary on the 4x4, k=8
/// torus, and the microscopic conservation law holds on all 12870 states.
#[test]
fn a01_stationarity_and_conservation() {
    let gen = build_generator(4, 4, 8).unwrap();
    assert_eq!(gen.ensemble.len(), 12870);
    let max_row = gen.l.row_sums().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_col = gen.l.col_sums().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cons = gen.conservation_law_violation();
    let ok = max_row <= 1e-12 && max_col <= 1e-12 && cons <= 1e-12;
    verdict(
        1,
        "exact stationarity + conservation law (4x4, k=8)",
        ok,
        &format!("max|row sum| {max_row:.1e}, max|col sum| {max_col:.1e}, conservation {cons:.1e}"),
    );
}

/// Replica-batched Laplace transform of t D(t): estimate from the full
/// ensemble, standard error from the spread of per-batch transforms.
fn laplace_with_se(ci: &CurrentIntegral, lambda: f64, batches: usize) -> (f64, f64) {
    let full = laplace_transform_d(&diffusivity_green_kubo(ci), lambda).unwrap();
    let per = ci.j.len() / batches;
    let chi = ci.rho * (1.0 - ci.rho);
    let vf = ci.volume as f64;
    let mut vals = Vec::with_capacity(batches);
    for b in 0..batches {
        let slice = &ci.j[b * per..(b + 1) * per];
        let mut values = Vec::with_capacity(ci.t_grid.len());
        for (ti, &t) in ci.t_grid.iter().enumerate() {
            let mean = slice.iter().map(|r| r[ti]).sum::<f64>() / per as f64;
            let msq = slice.iter().map(|r| r[ti] * r[ti]).sum::<f64>() / per as f64;
            values.push(0.5 + (msq - mean * mean) / (chi * vf * t));
        }
        let curve = DiffusivityCurve {
            t_grid: ci.t_grid.clone(),
            errors: vec![0.0; values.len()],
            values,
        };
        vals.push(laplace_transform_d(&curve, lambda).unwrap().value);
    }
    let mean = vals.iter().sum::<f64>() / batches as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (batches - 1) as f64;
    (full.value, (var / batches as f64).sqrt())
}

/// 2. Monte Carlo Laplace transform of t D11(t) matches
/// 1/(2 lambda^2) + 2 chi^-1 lambda^-2 <<w,(lambda-L)^-1 w>> from the
/// explicit generator matrix, within 3 sigma + 1%.
#[test]
fn a02_laplace_identity_closure() {
    let (width, height, k) = (4, 4, 8);
    let params = SimParams {
        width,
        height,
        rho: 0.5,
        replicas: 4000,
        seed: 71,
        mode: DynamicsMode::Full,
        canonical_k: Some(k),
    };
    let chi = params.chi();
    // lambda down to 0.05 needs lambda * t_max >= 5: dense early grid for
    // the lambda = 1 weight, coarse out to t = 120 for the tail.
    let mut t_grid: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    t_grid.extend((11..=120).map(|i| i as f64));
    let ci = measure_current_integral(&params, &t_grid).unwrap();
    let gen = build_generator(width, height, k).unwrap();

    let mut ok = true;
    let mut detail = String::new();
    for lambda in [0.05, 0.2, 1.0] {
        let (mc, se) = laplace_with_se(&ci, lambda, 40);
        let rv = gen.exact_resolvent(lambda).unwrap();
        let exact = 0.5 / (lambda * lambda) + 2.0 / (chi * lambda * lambda) * rv.value;
        let halved = 0.5 / (lambda * lambda) + 1.0 / (chi * lambda * lambda) * rv.value;
        let tol = 3.0 * se + 0.01 * exact;
        ok &= (mc - exact).abs() <= tol;
        detail.push_str(&format!(
            "lambda {lambda}: mc {mc:.4} vs exact {exact:.4} +- {tol:.4} \
             [single-weight variant would give {halved:.4}]; "
        ));
    }
    verdict(2, "Laplace identity closure (4x4, k=8)", ok, detail.trim_end_matches("; "));
}

/// 3. Variance bound: simulated Var[t^{-1/2} J]/(chi V) stays below the
/// oracle resolvent form 2 <<w,(1/t - L)^{-1} w>>/chi within 3 sigma.
#[test]
fn a03_current_variance_resolvent_bound() {
    let (width, height, k) = (4, 4, 8);
    let params = SimParams {
        width,
        height,
        rho: 0.5,
        replicas: 3000,
        seed: 29,
        mode: DynamicsMode::Full,
        canonical_k: Some(k),
    };
    let chi = params.chi();
    let t_grid = [1.0, 5.0, 20.0];
    let ci = measure_current_integral(&params, &t_grid).unwrap();
    let gen = build_generator(width, height, k).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        let (lhs, se) = normalized_current_variance(&ci, ti);
        let rhs = 2.0 * gen.exact_resolvent(1.0 / t).unwrap().value / chi;
        ok &= lhs <= rhs + 3.0 * se;
        detail.push_str(&format!("t {t}: {lhs:.4} <= {rhs:.4} + {:.4}; ", 3.0 * se));
    }
    verdict(3, "current variance below resolvent bound", ok, detail.trim_end_matches("; "));
}

/// 4. Equilibrium sum rules on the 64^2 torus: sum_x S = chi = 1/4 and a
/// vanishing first moment at density 1/2; at density 1/4 the structure
/// function drifts at the kinematic wave speed, the flux derivative
/// d/d rho [rho(1 - rho)] = 1 - 2 rho = 1/2 for unit-rate rightward
/// jumps. All within 3 sigma.
#[test]
fn a04_sum_rules_and_velocity() {
    let base = SimParams {
        width: 64,
        height: 64,
        rho: 0.5,
        replicas: 150,
        seed: 4096,
        mode: DynamicsMode::Full,
        canonical_k: None,
    };
    let t_grid = [2.0, 5.0, 10.0];
    let corr = measure_structure_function(&base, &t_grid).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for (ti, &t) in corr.t_grid.iter().enumerate() {
        let stats: Vec<Vec<f64>> = corr
            .replica_moments
            .iter()
            .map(|per_t| {
                let m = &per_t[ti];
                vec![m.total, m.first_x1, m.first_x2]
            })
            .collect();
        let (total, total_se) = jackknife(&stats, |s| s[0]);
        let (fx1, fx1_se) = jackknife(&stats, |s| s[1]);
        let (fx2, fx2_se) = jackknife(&stats, |s| s[2]);
        ok &= (total - 0.25).abs() <= 3.0 * total_se;
        ok &= fx1.abs() <= 3.0 * fx1_se && fx2.abs() <= 3.0 * fx2_se;
        detail.push_str(&format!("t {t}: sum S {total:.4} +- {total_se:.4}; "));
    }
    let tilted = SimParams { rho: 0.25, seed: 8192, ..base };
    let expected_v = 1.0 - 2.0 * tilted.rho;
    let corr = measure_structure_function(&tilted, &t_grid).unwrap();
    let (v, v_se) = velocity_from_first_moment(&corr);
    ok &= (v - expected_v).abs() <= 3.0 * v_se;
    detail.push_str(&format!("velocity at rho=1/4: {v:.3} +- {v_se:.3} vs {expected_v}"));
    verdict(4, "equilibrium sum rules + drift velocity (64^2)", ok, &detail);
}

fn graded_grid(lambda: f64, points_per_side: usize) -> Arc<Grid2d> {
    let p_min = lambda.sqrt().min(std::f64::consts::PI / 4.0);
    Arc::new(Grid2d::new(Grid1d::geometric(p_min, points_per_side).unwrap()))
}

/// 5. Degree-3 truncation scaling: the fitted |log lambda| exponent over
/// six decades lies in [0.4, 0.6], with per-point grid-refinement deltas
/// below 2%.
#[test]
fn a05_degree_three_exponent() {
    let lambdas: Vec<f64> = (3..=9).map(|d| 10f64.powi(-d)).collect();
    let mut values = Vec::new();
    let mut worst_delta = 0.0f64;
    for (i, &lambda) in lambdas.iter().enumerate() {
        // Resolution must track depth: the graded grid stretches the same
        // point budget over more octaves as lambda shrinks, so points per
        // side scale with the number of decades (floor of 16 for the
        // shallow end, where per-decade scaling alone under-resolves).
        let pps = 16usize.max(3 * (i + 3));
        let v =
            resolvent_truncated(&NestedResolventSpec::exact(3, lambda, graded_grid(lambda, pps)))
                .unwrap();
        let vf = resolvent_truncated(&NestedResolventSpec::exact(
            3,
            lambda,
            graded_grid(lambda, pps + 4),
        ))
        .unwrap();
        worst_delta = worst_delta.max((vf.value - v.value).abs() / v.value);
        values.push(vf.value);
    }
    let fit = fit_log_power(&lambdas, &values).unwrap();
    let ok = (0.4..=0.6).contains(&fit.exponent) && worst_delta < 0.02;
    verdict(
        5,
        "degree-3 resolvent exponent in [0.4, 0.6]",
        ok,
        &format!("exponent {:.3}, worst refinement delta {:.2}%", fit.exponent, 100.0 * worst_delta),
    );
}

/// 6. Scalar model integral: K/|log(lambda + a^2 + b^2)|^{1 - kappa/2}
/// stays within a fixed band across six orders of lambda, centered and
/// off-center, for four kappa values.
#[test]
fn a06_model_integral_bands() {
    let tau = 1.5;
    let lambdas = [1e-6, 1e-9, 1e-12];
    let mut ok = true;
    let mut worst = 1.0f64;
    for kappa in [0.0, 0.5, 2.0 / 3.0, 1.0] {
        let e = 1.0 - kappa / 2.0;
        for center in [true, false] {
            let ratio = |lambda: f64| {
                let ab = if center { 0.0 } else { lambda.ln().abs().powf(-4.0 * tau) };
                let k =
                    k_integral(&KIntegralSpec::new(kappa, tau, ab / 2.0, ab / 2.0, lambda)).unwrap();
                k / (lambda + ab).ln().abs().powf(e)
            };
            let c = ratio(1e-6);
            for &lambda in &lambdas {
                let drift = (ratio(lambda) / c).max(c / ratio(lambda));
                worst = worst.max(drift);
                ok &= drift < 2.0;
            }
        }
    }
    verdict(6, "model-integral exponent bands", ok, &format!("worst band drift {worst:.3}x < 2x"));
}

/// 7. Exponent schedule exactness: the pinned tail (0, 1, 1/2, 2/3 + 1/12),
/// the exact rational recursion kappa_(n-1) = 1 - kappa_n / 2, and the
/// fixed point 2/3 within 2^-20 after 20 iterations.
#[test]
fn a07_kappa_schedule_exactness() {
    let mut ok = true;
    let mut detail = String::new();
    for n in [2usize, 5, 20] {
        let s = kappa_schedule(n, false).unwrap();
        ok &= s.check_recursion().is_none();
        let tail: Vec<f64> = s.values.iter().rev().take(4).map(rational_to_f64).collect();
        ok &= tail == [0.0, 1.0, 0.5, 2.0 / 3.0 + 1.0 / 12.0];
        detail.push_str(&format!("N {n}: recursion exact, tail pinned; "));
    }
    let last = *iterate_kappa(0.0, 20).last().unwrap();
    let err = (last - 2.0 / 3.0).abs();
    ok &= err <= 2f64.powi(-20);
    detail.push_str(&format!("fixed-point error {err:.2e} <= 2^-20"));
    verdict(7, "exponent schedule exact in rationals", ok, &detail);
}

/// 8. Interlacing of the truncations: v3 <= v5 <= v4 <= v2 at lambda in
/// {1e-3, 1e-5}, with margins well above the solver tolerance.
#[test]
fn a08_truncation_interlacing() {
    let mut ok = true;
    let mut detail = String::new();
    for (lambda, tol5) in [(1e-3, 1e-6), (1e-5, 1e-5)] {
        let g = graded_grid(lambda, 2);
        // the degree-5 level is far more expensive per digit; its looser
        // tolerance sets the scale the margins must beat (the margins
        // shrink with lambda more slowly than the values grow, so the
        // shallow point needs the tighter solve)
        let solve = |n: usize, tol: f64| {
            let mut spec = NestedResolventSpec::exact(n, lambda, g.clone());
            spec.tol = tol;
            resolvent_truncated(&spec).unwrap().value
        };
        let v2 = resolvent_degree_two_diagonal(&g, lambda).unwrap();
        let (v3, v4, v5) = (solve(3, 1e-8), solve(4, 1e-8), solve(5, tol5));
        let margin = (v5 - v3).min(v4 - v5).min(v2 - v4);
        ok &= margin > 10.0 * tol5 * v4;
        detail.push_str(&format!(
            "lambda {lambda:.0e}: {v3:.4} <= {v5:.4} <= {v4:.4} <= {v2:.4}, margin {margin:.1e} > {:.1e}; ",
            10.0 * tol5 * v4
        ));
    }
    verdict(8, "truncation interlacing v3 <= v5 <= v4 <= v2", ok, detail.trim_end_matches("; "));
}

/// 9. Two-sided estimate, upper direction: the raising-operator sandwich
/// never exceeds the diagonal multiplier bound over 100 random symmetric
/// test functions at kappa = 1, tau = 1.5.
#[test]
fn a09_sandwich_inequality() {
    let grid = Arc::new(Grid2d::uniform(6).unwrap());
    let reports =
        verify_main_estimate_sandwich(1.0, 1.5, 2, &[1e-6, 1e-9], &grid, 100, 2718).unwrap();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let worst = reports.iter().fold(0.0f64, |m, r| m.max(r.worst_ratio));
    verdict(
        9,
        "sandwich inequality over random test functions",
        violations == 0,
        &format!("0 violations required, got {violations}; worst ratio {worst:.4} <= 1"),
    );
}

/// 10. Exponent-drift report: local |log lambda| exponents around
/// lambda = 1e-6 for truncation depths 3, 4, 5. The depth-3 exponent sits
/// lowest; deeper levels overshoot/undershoot 2/3 alternately, so the
/// report asserts both deeper exponents exceed the depth-3 one and prints
/// the shrinking distance to 2/3.
#[test]
fn a10_exponent_drift_report() {
    let lam_lo = 10f64.powf(-6.5);
    let lam_hi = 10f64.powf(-5.5);
    let grid = graded_grid(lam_lo, 2);
    let mut hats = Vec::new();
    let mut detail = String::new();
    for n in [3usize, 4, 5] {
        // local log-slopes need ~1e-3 relative accuracy; degree 5 at this
        // depth is the budget driver
        let tol = if n == 5 { 1e-4 } else { 1e-7 };
        let solve = |lambda: f64| {
            let mut spec = NestedResolventSpec::exact(n, lambda, grid.clone());
            spec.tol = tol;
            resolvent_truncated(&spec).unwrap().value
        };
        let (v_lo, v_hi) = (solve(lam_lo), solve(lam_hi));
        let hat = (v_lo.ln() - v_hi.ln())
            / (lam_lo.ln().abs().ln() - lam_hi.ln().abs().ln());
        detail.push_str(&format!("n {n}: local exponent {hat:.3} (|. - 2/3| {:.3}); ",
            (hat - 2.0 / 3.0).abs()));
        hats.push(hat);
    }
    let ok = hats[1] > hats[0] && hats[2] > hats[0];
    verdict(10, "exponent drift with truncation depth", ok, detail.trim_end_matches("; "));
}
