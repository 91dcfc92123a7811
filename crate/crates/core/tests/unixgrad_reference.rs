//! Reference-trace and rate checks for the adaptive extragradient method.

use std::sync::Arc;

use grasp_core::base::run_unixgrad;
use grasp_core::problems::{NoiseModel, Problem, StochasticOracle};

fn noiseless(p: Problem) -> StochasticOracle {
    StochasticOracle::new(Arc::new(p), NoiseModel::noiseless(), 0, None)
}

/// Straight-line scalar transcription of the update rules for the
/// one-dimensional unit quadratic (gradient of x^2/2 is x), kept
/// independent of the production implementation.
fn reference_trace_1d(x0: f64, diameter: f64, pairs: u32) -> f64 {
    let (lo, hi) = (x0 - diameter, x0 + diameter);
    let clamp = |v: f64| v.clamp(lo, hi);
    let mut hat = x0;
    let mut sum_ax = 0.0f64;
    let mut acc = 0.0f64;
    let mut bar = x0;
    for t in 1..=pairs {
        let alpha = t as f64;
        let alpha_sum = alpha * (alpha + 1.0) / 2.0;
        let eta = 2.0 * diameter / (1.0 + acc).sqrt();
        let tilde = (alpha * hat + sum_ax) / alpha_sum;
        let g_tilde = tilde;
        let x_t = clamp(hat - eta * alpha * g_tilde);
        bar = (alpha * x_t + sum_ax) / alpha_sum;
        let g_bar = bar;
        let next_hat = clamp(hat - eta * alpha * g_bar);
        acc += alpha * alpha * (g_bar - g_tilde) * (g_bar - g_tilde);
        sum_ax += alpha * x_t;
        hat = next_hat;
    }
    bar
}

#[test]
fn three_step_trace_matches_to_1e12() {
    let mut o = noiseless(Problem::quadratic(vec![0.0], vec![1.0]).unwrap());
    let run = run_unixgrad(&mut o, &[4.0], 8.0, 3).unwrap();
    let expected = reference_trace_1d(4.0, 8.0, 3);
    assert!(
        (run.output[0] - expected).abs() <= 1e-12,
        "got {} want {}",
        run.output[0],
        expected
    );
    assert_eq!(run.calls, 6);
}

#[test]
fn longer_traces_match_too() {
    for pairs in [1u32, 2, 5, 17, 64] {
        let mut o = noiseless(Problem::quadratic(vec![0.0], vec![1.0]).unwrap());
        let run = run_unixgrad(&mut o, &[4.0], 8.0, pairs as u64).unwrap();
        let expected = reference_trace_1d(4.0, 8.0, pairs);
        let scale = expected.abs().max(1.0);
        assert!(
            (run.output[0] - expected).abs() <= 1e-12 * scale,
            "pairs {pairs}: got {} want {}",
            run.output[0],
            expected
        );
    }
}

#[test]
fn deterministic_quadratic_rate_is_at_least_quadratic_in_budget() {
    // start at half the ball radius from the optimum; gaps underflow to
    // zero once convergence goes superlinear, so the fit stops at 2^9
    let p = Problem::quadratic(vec![0.0], vec![1.0]).unwrap();
    let problem = p.clone();
    let mut pts = Vec::new();
    for k in 6..=9u32 {
        let pairs = 1u64 << k;
        let mut o = noiseless(p.clone());
        let run = run_unixgrad(&mut o, &[4.0], 8.0, pairs).unwrap();
        let gap = problem.objective(&run.output);
        pts.push(((pairs as f64).ln(), gap.max(1e-300).ln()));
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    let slope = num / den;
    assert!(slope <= -1.7, "slope {slope}");
}
