//! Harness-side operations: exhaustive baseline tuning, the relative
//! difference measure, rate fitting, and sliding-window checkpoint
//! selection.

use std::sync::Arc;

use grasp_core::base::{run_sgd, run_unixgrad};
use grasp_core::exec;
use grasp_core::grasp::{selfbound_c_dmax, selfbound_nc_ranges, UserInputs};
use grasp_core::problems::{NoiseModel, Problem, StochasticOracle};
use grasp_core::vector;

use crate::config::BaselineAlgo;
use crate::{median, HarnessError};

/// Result of tuning one baseline.
#[derive(Debug, Clone, Copy)]
pub struct TunedBaseline {
    pub best_param: f64,
    /// Median-over-seeds metric at the best grid value: for SGD the
    /// trajectory-mean gradient norm (the expected gradient norm of the
    /// randomized-stopping output), for `unixgrad` the true suboptimality
    /// gap of the output.
    pub metric: f64,
}

/// Runs the base algorithm once per fine-grid value per seed with the whole
/// budget, and returns the grid value minimizing the median metric.
///
/// Diverged runs score infinity and are never selected. Metrics come from
/// the problem's ground truth and cost no oracle budget.
pub fn tune_baseline(
    problem: &Arc<Problem>,
    noise: &NoiseModel,
    seeds: &[u64],
    budget: u64,
    algo: BaselineAlgo,
    x0: &[f64],
    fine_grid: &[f64],
) -> Result<TunedBaseline, HarnessError> {
    if fine_grid.is_empty() {
        return Err(HarnessError::DegenerateInput("empty fine grid".into()));
    }
    if seeds.is_empty() {
        return Err(HarnessError::DegenerateInput("empty seed set".into()));
    }
    if algo == BaselineAlgo::Unixgrad && problem.truth().is_none() {
        return Err(HarnessError::MissingGroundTruth(problem.name().to_string()));
    }
    let jobs: Vec<(f64, u64)> = fine_grid
        .iter()
        .flat_map(|&g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let metrics = exec::map_items(jobs.clone(), |(param, seed)| {
        let mut oracle =
            StochasticOracle::new(Arc::clone(problem), noise.clone(), seed, Some(budget));
        baseline_run_metric(problem, &mut oracle, algo, x0, param, budget)
    });

    let mut best = TunedBaseline {
        best_param: fine_grid[0],
        metric: f64::INFINITY,
    };
    for (gi, &param) in fine_grid.iter().enumerate() {
        let per_seed: Vec<f64> = (0..seeds.len())
            .map(|si| metrics[gi * seeds.len() + si])
            .collect();
        let m = median(per_seed);
        if m < best.metric {
            best = TunedBaseline {
                best_param: param,
                metric: m,
            };
        }
    }
    Ok(best)
}

fn baseline_run_metric(
    problem: &Arc<Problem>,
    oracle: &mut StochasticOracle,
    algo: BaselineAlgo,
    x0: &[f64],
    param: f64,
    budget: u64,
) -> f64 {
    match algo {
        BaselineAlgo::Sgd => match run_sgd(oracle, x0, param, budget) {
            Ok(run) if !run.diverged => {
                let mean_sq = run
                    .trajectory
                    .iter()
                    .map(|x| vector::norm_sq(&problem.gradient(x)))
                    .sum::<f64>()
                    / run.trajectory.len() as f64;
                mean_sq.sqrt()
            }
            _ => f64::INFINITY,
        },
        BaselineAlgo::Unixgrad => {
            let pairs = budget / 2;
            if pairs == 0 {
                return f64::INFINITY;
            }
            match run_unixgrad(oracle, x0, param, pairs) {
                Ok(run) => problem.true_gap(&run.output).unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            }
        }
    }
}

/// Default 20-point geometric fine grid for the SGD baseline: spans a
/// quarter of the derived step-size lower bound to four times the upper
/// bound, a strict superset of the search bracket. The bracket comes from
/// the exact gradient norm at `x0`, so the tuner is deterministic.
pub fn default_sgd_grid(
    problem: &Problem,
    x0: &[f64],
    inputs: &UserInputs,
    points: usize,
) -> Result<Vec<f64>, HarnessError> {
    let g0 = problem.true_grad_norm(x0);
    let r = selfbound_nc_ranges(g0, inputs.budget, inputs)?;
    Ok(geometric_grid(r.eta_min / 4.0, 4.0 * r.eta_max, points))
}

/// Default fine grid for the `unixgrad` baseline: spans a quarter of the
/// distance floor to four times the derived distance bound.
pub fn default_unixgrad_grid(
    problem: &Problem,
    x0: &[f64],
    inputs: &UserInputs,
    points: usize,
) -> Result<Vec<f64>, HarnessError> {
    let g0 = problem.true_grad_norm(x0);
    let l0 = problem.objective(x0);
    let d_max = selfbound_c_dmax(inputs.dmax_option, g0, l0, inputs, inputs.budget)?;
    Ok(geometric_grid(
        inputs.distance_floor / 4.0,
        4.0 * d_max,
        points,
    ))
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 1 && lo > 0.0 && hi >= lo);
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// Relative difference `(out - tuned) / tuned`. Negative values mean the
/// measured method beat the tuned baseline and are reported as-is.
pub fn relative_difference(out_metric: f64, tuned_metric: f64) -> Result<f64, HarnessError> {
    if tuned_metric == 0.0 {
        return Err(HarnessError::DivisionByZero);
    }
    Ok((out_metric - tuned_metric) / tuned_metric)
}

/// Least-squares slope of `ln err` against `ln T`.
pub fn fit_rate(points: &[(u64, f64)]) -> Result<f64, HarnessError> {
    if points.len() < 4 {
        return Err(HarnessError::DegenerateInput(format!(
            "rate fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(HarnessError::DegenerateInput(
                "budgets must strictly increase".into(),
            ));
        }
    }
    if points
        .iter()
        .any(|&(_, e)| e.is_nan() || e <= 0.0 || !e.is_finite())
    {
        return Err(HarnessError::DegenerateInput(
            "errors must be positive and finite".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(t, _)| (t as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(num / den)
}

/// Index whose trailing-window average is minimal (first such index on
/// ties). The practical alternative to the theoretical ensembles.
pub fn checkpoint_select(values: &[f64], window: usize) -> Result<usize, HarnessError> {
    if window == 0 || window > values.len() {
        return Err(HarnessError::WindowTooLarge {
            window,
            len: values.len(),
        });
    }
    let mut best_idx = window - 1;
    let mut best_avg = f64::INFINITY;
    let mut acc: f64 = values[..window].iter().sum();
    for end in (window - 1)..values.len() {
        if end >= window {
            acc += values[end] - values[end - window];
        }
        let avg = acc / window as f64;
        if avg < best_avg {
            best_avg = avg;
            best_idx = end;
        }
    }
    Ok(best_idx)
}
