//! Executes configured experiments: single runs, budget sweeps for rate
//! fitting, and GRASP-vs-tuned comparisons. Seeds and sweep points are
//! independent jobs executed through the core's data-parallel map; report
//! assembly is a deterministic merge in (budget, seed) order.

use std::sync::Arc;
use std::time::Instant;

use grasp_core::exec;
use grasp_core::grasp::{
    grasp_c, grasp_c_nolb, grasp_deterministic, grasp_nc, GraspResult, UserInputs,
};
use grasp_core::problems::{NoiseModel, Problem, StochasticOracle};
use grasp_core::vector;

use crate::config::{AlgorithmName, BaselineAlgo, ExperimentConfig, OutputFormat};
use crate::ops::{
    default_sgd_grid, default_unixgrad_grid, fit_rate, relative_difference, tune_baseline,
};
use crate::report::{ComparisonReport, RunReport};
use crate::{median, HarnessError};

/// Seed offset for baseline tuning runs, so the tuner never reuses the
/// random streams of the runs it is compared against.
const BASELINE_SEED_OFFSET: u64 = 10_000;

pub fn dispatch(
    name: AlgorithmName,
    oracle: &mut StochasticOracle,
    x0: &[f64],
    inputs: &UserInputs,
) -> Result<GraspResult, HarnessError> {
    let res = match name {
        AlgorithmName::GraspDeterministic => grasp_deterministic(oracle, x0, inputs)?,
        AlgorithmName::GraspNc => grasp_nc(oracle, x0, inputs)?,
        AlgorithmName::GraspC => grasp_c(oracle, x0, inputs)?,
        AlgorithmName::GraspCNolb => grasp_c_nolb(oracle, x0, inputs)?,
    };
    Ok(res)
}

fn one_run(
    cfg: &ExperimentConfig,
    problem: &Arc<Problem>,
    noise: &NoiseModel,
    seed: u64,
    budget: u64,
) -> Result<RunReport, HarnessError> {
    let mut inputs = cfg.algorithm.user_inputs();
    inputs.budget = budget;
    let mut oracle = StochasticOracle::new(Arc::clone(problem), noise.clone(), seed, Some(budget));
    let started = Instant::now();
    let res = dispatch(cfg.algorithm.name, &mut oracle, &cfg.run.x0, &inputs)?;
    let wall_time = started.elapsed();
    let g = problem.gradient(&res.output);
    let grad_norm = vector::norm(&g);
    let mut report = RunReport {
        problem: cfg.problem_name().to_string(),
        noise: cfg.noise.describe(),
        algorithm: cfg.algorithm.name.to_string(),
        seed,
        budget,
        confidence: inputs.confidence,
        smoothness_floor: inputs.smoothness_floor,
        gap_floor: inputs.gap_floor,
        distance_floor: inputs.distance_floor,
        value_lower_bound: inputs.value_lower_bound,
        option: match inputs.dmax_option {
            grasp_core::grasp::DmaxOption::GradientBased => "gradient".to_string(),
            grasp_core::grasp::DmaxOption::ValueBased => "value".to_string(),
        },
        initial_fraction: inputs.initial_fraction,
        x0: cfg.run.x0.clone(),
        output: res.output.clone(),
        selected: res.selected.to_string(),
        degenerate: res.degenerate,
        cells: res.cells,
        samples_per_cell: res.samples_per_cell,
        estimation_samples: res.estimation_samples,
        calls_total: res.ledger.total(),
        ledger: res
            .ledger
            .entries()
            .iter()
            .map(|(s, c)| (s.clone(), *c))
            .collect(),
        d_max: None,
        eta_min: None,
        eta_max: None,
        l_max: None,
        f_max: None,
        delta_sq_max: None,
        true_gap: problem.true_gap(&res.output),
        true_grad_norm: grad_norm,
        true_grad_norm_sq: grad_norm * grad_norm,
        wall_time,
    };
    report.ranges(&res.ranges);
    Ok(report)
}

/// Runs every configured seed and returns reports sorted by seed.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Vec<RunReport>, HarnessError> {
    let problem = cfg.problem.build()?;
    let noise = cfg.noise.build();
    let budget = cfg.algorithm.budget;
    let jobs: Vec<u64> = cfg.run.seeds.clone();
    let results = exec::map_items(jobs, |seed| one_run(cfg, &problem, &noise, seed, budget));
    results.into_iter().collect()
}

/// Sweep outcome: every run report plus the fitted log-log slope of the
/// per-budget median metric.
pub struct SweepOutcome {
    pub reports: Vec<RunReport>,
    pub medians: Vec<(u64, f64)>,
    pub slope: f64,
}

/// Per-run scalar the sweep and comparison aggregate: squared gradient norm
/// for the non-convex searcher, true gap for the convex ones.
pub fn run_metric(name: AlgorithmName, report: &RunReport) -> Result<f64, HarnessError> {
    match name {
        AlgorithmName::GraspNc => Ok(report.true_grad_norm_sq),
        _ => report
            .true_gap
            .ok_or_else(|| HarnessError::MissingGroundTruth(report.problem.clone())),
    }
}

/// Runs a budget sweep and fits the convergence slope on per-budget median
/// metrics. Medians that underflow to zero are clamped to 1e-300 before the
/// fit.
pub fn sweep(cfg: &ExperimentConfig, budgets: &[u64]) -> Result<SweepOutcome, HarnessError> {
    if budgets.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one budget".into(),
        ));
    }
    let problem = cfg.problem.build()?;
    let noise = cfg.noise.build();
    let jobs: Vec<(u64, u64)> = budgets
        .iter()
        .flat_map(|&b| cfg.run.seeds.iter().map(move |&s| (b, s)))
        .collect();
    let results = exec::map_items(jobs, |(budget, seed)| {
        one_run(cfg, &problem, &noise, seed, budget)
    });
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        reports.push(r?);
    }
    let per_seed = cfg.run.seeds.len();
    let mut medians = Vec::with_capacity(budgets.len());
    for (bi, &b) in budgets.iter().enumerate() {
        let ms: Result<Vec<f64>, _> = reports[bi * per_seed..(bi + 1) * per_seed]
            .iter()
            .map(|r| run_metric(cfg.algorithm.name, r))
            .collect();
        medians.push((b, median(ms?).max(1e-300)));
    }
    let slope = fit_rate(&medians)?;
    Ok(SweepOutcome {
        reports,
        medians,
        slope,
    })
}

/// Comparison outcome: the GRASP reports plus the comparison record.
pub struct CompareOutcome {
    pub reports: Vec<RunReport>,
    pub comparison: ComparisonReport,
}

/// Baseline-tuning outcome, with the metric in the units of [`run_metric`].
pub struct TuneOutcome {
    pub metric_kind: &'static str,
    pub tuned_param: f64,
    pub tuned_metric: f64,
    pub fine_grid: Vec<f64>,
}

/// Tunes the configured baseline exhaustively on its fine grid, giving each
/// run the whole budget.
pub fn tune(cfg: &ExperimentConfig) -> Result<TuneOutcome, HarnessError> {
    let problem = cfg.problem.build()?;
    let noise = cfg.noise.build();
    let inputs = cfg.algorithm.user_inputs();
    let algo = match &cfg.baseline {
        Some(b) => b.algorithm,
        None => match cfg.algorithm.name {
            AlgorithmName::GraspNc => BaselineAlgo::Sgd,
            _ => BaselineAlgo::Unixgrad,
        },
    };
    let grid_points = cfg.baseline.as_ref().map(|b| b.grid_points).unwrap_or(20);
    let fine_grid = match cfg.baseline.as_ref().and_then(|b| b.grid.clone()) {
        Some(g) => g,
        None => match algo {
            BaselineAlgo::Sgd => default_sgd_grid(&problem, &cfg.run.x0, &inputs, grid_points)?,
            BaselineAlgo::Unixgrad => {
                default_unixgrad_grid(&problem, &cfg.run.x0, &inputs, grid_points)?
            }
        },
    };
    let tuner_seeds: Vec<u64> = cfg
        .run
        .seeds
        .iter()
        .map(|&s| s + BASELINE_SEED_OFFSET)
        .collect();
    let tuned = tune_baseline(
        &problem,
        &noise,
        &tuner_seeds,
        cfg.algorithm.budget,
        algo,
        &cfg.run.x0,
        &fine_grid,
    )?;
    // same units as the GRASP metric this baseline is compared against
    let (metric_kind, tuned_metric) = match algo {
        BaselineAlgo::Sgd => ("grad_norm_sq", tuned.metric * tuned.metric),
        BaselineAlgo::Unixgrad => ("gap", tuned.metric),
    };
    Ok(TuneOutcome {
        metric_kind,
        tuned_param: tuned.best_param,
        tuned_metric,
        fine_grid,
    })
}

/// Runs GRASP over the configured seeds, tunes the baseline exhaustively on
/// its fine grid with the full budget, and reports the relative difference
/// of the median metrics.
pub fn compare(cfg: &ExperimentConfig) -> Result<CompareOutcome, HarnessError> {
    let reports = run_config(cfg)?;
    let ms: Result<Vec<f64>, _> = reports
        .iter()
        .map(|r| run_metric(cfg.algorithm.name, r))
        .collect();
    let grasp_metric = median(ms?);
    let tuned = tune(cfg)?;
    let rho = relative_difference(grasp_metric, tuned.tuned_metric)?;
    Ok(CompareOutcome {
        reports,
        comparison: ComparisonReport {
            metric_kind: tuned.metric_kind.to_string(),
            grasp_metric,
            tuned_metric: tuned.tuned_metric,
            tuned_param: tuned.tuned_param,
            rho,
            fine_grid: tuned.fine_grid,
        },
    })
}

/// Writes reports in the requested format.
pub fn write_reports<W: std::io::Write>(
    w: W,
    reports: &[RunReport],
    format: OutputFormat,
) -> Result<(), HarnessError> {
    match format {
        OutputFormat::Json => crate::report::write_json(w, &reports)?,
        OutputFormat::Csv => crate::report::write_csv(w, reports)?,
    }
    Ok(())
}
