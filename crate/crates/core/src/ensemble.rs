//! Averaged oracle estimation and candidate selection.
//!
//! Selection attaches an averaged statistic (gradient norm or function
//! value) to every candidate that does not already carry one, then returns
//! the argmin. Estimation of distinct candidates runs on sub-seeded child
//! oracles, so the result does not depend on scheduling order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec;
use crate::problems::{OracleError, StochasticOracle};
use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Where a candidate came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateSource {
    /// The benchmark point `x0`.
    Initial,
    /// Output of the grid cell with this 1-based index.
    GridCell { cell: usize },
    /// Point sampled from a grid cell's trajectory.
    TrajectorySample { cell: usize, index: usize },
}

impl std::fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CandidateSource::Initial => write!(f, "initial"),
            CandidateSource::GridCell { cell } => write!(f, "cell:{cell}"),
            CandidateSource::TrajectorySample { cell, index } => {
                write!(f, "cell:{cell}:step:{index}")
            }
        }
    }
}

/// A selection candidate with provenance and an optional attached estimate.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub point: Vec<f64>,
    pub source: CandidateSource,
    estimate: Option<f64>,
    samples_used: u64,
}

impl Candidate {
    pub fn new(point: Vec<f64>, source: CandidateSource) -> Self {
        Candidate {
            point,
            source,
            estimate: None,
            samples_used: 0,
        }
    }

    /// Candidate arriving with a precomputed estimate (e.g. the benchmark
    /// point with its initial-sampling statistic). It will not be resampled.
    pub fn with_estimate(
        point: Vec<f64>,
        source: CandidateSource,
        estimate: f64,
        samples_used: u64,
    ) -> Self {
        assert!(samples_used > 0, "an estimate requires at least one sample");
        Candidate {
            point,
            source,
            estimate: Some(estimate),
            samples_used,
        }
    }

    pub fn estimate(&self) -> Option<f64> {
        self.estimate
    }

    pub fn samples_used(&self) -> u64 {
        self.samples_used
    }
}

/// Mean of `m` independent gradient queries at `x`; consumes exactly `m`
/// calls.
pub fn average_gradient(
    oracle: &mut StochasticOracle,
    x: &[f64],
    m: u64,
) -> Result<Vec<f64>, EnsembleError> {
    if m == 0 {
        return Err(EnsembleError::InvalidInput(
            "sample count must be >= 1".into(),
        ));
    }
    let mut acc = vec![0.0; x.len()];
    for _ in 0..m {
        let g = oracle.query_gradient(x)?;
        vector::axpy_mut(&mut acc, 1.0, &g);
    }
    Ok(vector::scale(&acc, 1.0 / m as f64))
}

/// Mean of `m` independent value queries at `x`; consumes exactly `m` calls.
pub fn average_value(
    oracle: &mut StochasticOracle,
    x: &[f64],
    m: u64,
) -> Result<f64, EnsembleError> {
    if m == 0 {
        return Err(EnsembleError::InvalidInput(
            "sample count must be >= 1".into(),
        ));
    }
    let mut acc = 0.0;
    for _ in 0..m {
        acc += oracle.query_value(x)?;
    }
    Ok(acc / m as f64)
}

/// Draws `k` candidates uniformly with replacement from a trajectory,
/// tagging each with its trajectory index.
pub fn sample_trajectory_candidates(
    trajectory: &[Vec<f64>],
    k: u64,
    rng: &mut ChaCha8Rng,
    cell: usize,
) -> Result<Vec<Candidate>, EnsembleError> {
    if trajectory.is_empty() {
        return Err(EnsembleError::EmptyTrajectory);
    }
    if k == 0 {
        return Err(EnsembleError::InvalidInput("k must be >= 1".into()));
    }
    Ok((0..k)
        .map(|_| {
            let index = rng.random_range(0..trajectory.len());
            Candidate::new(
                trajectory[index].clone(),
                CandidateSource::TrajectorySample { cell, index },
            )
        })
        .collect())
}

/// Attaches an `m`-sample averaged gradient-norm estimate to every candidate
/// lacking one, then returns the index of the candidate with the smallest
/// estimate (ties go to the lowest index).
pub fn select_by_gradient_norm(
    candidates: &mut [Candidate],
    oracle: &mut StochasticOracle,
    m: u64,
) -> Result<usize, EnsembleError> {
    estimate_missing(candidates, oracle, m, |child, point, m| {
        average_gradient(child, point, m).map(|g| vector::norm(&g))
    })?;
    Ok(argmin_estimate(candidates))
}

/// Attaches an `m`-sample averaged value estimate to every candidate lacking
/// one, then returns the index of the candidate with the smallest estimate
/// (ties go to the lowest index).
pub fn select_by_value(
    candidates: &mut [Candidate],
    oracle: &mut StochasticOracle,
    m: u64,
) -> Result<usize, EnsembleError> {
    estimate_missing(candidates, oracle, m, |child, point, m| {
        average_value(child, point, m)
    })?;
    Ok(argmin_estimate(candidates))
}

fn estimate_missing<F>(
    candidates: &mut [Candidate],
    oracle: &mut StochasticOracle,
    m: u64,
    estimator: F,
) -> Result<(), EnsembleError>
where
    F: Fn(&mut StochasticOracle, &[f64], u64) -> Result<f64, EnsembleError> + Sync,
{
    if candidates.is_empty() {
        return Err(EnsembleError::EmptyCandidates);
    }
    if m == 0 {
        return Err(EnsembleError::InvalidInput(
            "sample count must be >= 1".into(),
        ));
    }
    let missing: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.estimate.is_none())
        .map(|(i, _)| i)
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    if oracle.remaining() < m * missing.len() as u64 {
        return Err(OracleError::BudgetExhausted {
            used: oracle.calls_used(),
            cap: oracle.budget_cap().unwrap_or(u64::MAX),
        }
        .into());
    }
    // one sub-seeded child per candidate; estimation order cannot matter
    let jobs: Vec<(usize, Vec<f64>, StochasticOracle)> = missing
        .iter()
        .map(|&i| (i, candidates[i].point.clone(), oracle.derive(Some(m))))
        .collect();
    let results = exec::map_items(jobs, |(i, point, mut child)| {
        let r = estimator(&mut child, &point, m);
        (i, r, child.calls_used())
    });
    for (i, r, calls) in results {
        oracle.record_calls(calls);
        let est = r?;
        candidates[i].estimate = Some(est);
        candidates[i].samples_used = m;
    }
    Ok(())
}

fn argmin_estimate(candidates: &[Candidate]) -> usize {
    // NaN estimates (overflow artifacts from diverged runs) rank worst
    let rank = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut best = 0usize;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let vi = rank(c.estimate.expect("estimate attached"));
        let vb = rank(candidates[best].estimate.expect("estimate attached"));
        if vi.total_cmp(&vb) == std::cmp::Ordering::Less {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;

    use super::*;
    use crate::problems::{NoiseModel, Problem};

    fn quad(dim: usize) -> Arc<Problem> {
        Arc::new(Problem::quadratic(vec![0.0; dim], vec![1.0; dim]).unwrap())
    }

    fn cand(point: Vec<f64>) -> Candidate {
        Candidate::new(point, CandidateSource::Initial)
    }

    #[test]
    fn averaging_zero_noise_is_exact() {
        let mut o = StochasticOracle::new(quad(2), NoiseModel::noiseless(), 1, None);
        let g = average_gradient(&mut o, &[2.0, 1.0], 17).unwrap();
        assert_eq!(g, vec![2.0, 1.0]);
        assert_eq!(average_value(&mut o, &[2.0, 0.0], 5).unwrap(), 2.0);
        assert_eq!(o.calls_used(), 22);
    }

    #[test]
    fn single_sample_average_is_one_raw_query() {
        let p = quad(2);
        let noise = NoiseModel::constant(0.5, 0.3);
        let mut a = StochasticOracle::new(Arc::clone(&p), noise.clone(), 9, None);
        let mut b = StochasticOracle::new(p, noise, 9, None);
        assert_eq!(
            average_gradient(&mut a, &[1.0, 1.0], 1).unwrap(),
            b.query_gradient(&[1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn noiseless_gradient_selection_returns_true_argmin() {
        // gradient of 1/2||x||^2 is x, so norms are 3, 1, 2
        let mut cs = vec![
            cand(vec![3.0, 0.0]),
            cand(vec![1.0, 0.0]),
            cand(vec![0.0, 2.0]),
        ];
        let mut o = StochasticOracle::new(quad(2), NoiseModel::noiseless(), 1, None);
        assert_eq!(select_by_gradient_norm(&mut cs, &mut o, 4).unwrap(), 1);
        assert_eq!(o.calls_used(), 12);
        assert_eq!(cs[1].samples_used(), 4);
    }

    #[test]
    fn noiseless_value_selection_returns_true_argmin() {
        // values 4.5, 2, 8
        let mut cs = vec![
            cand(vec![3.0, 0.0]),
            cand(vec![2.0, 0.0]),
            cand(vec![4.0, 0.0]),
        ];
        let mut o = StochasticOracle::new(quad(2), NoiseModel::noiseless(), 1, None);
        assert_eq!(select_by_value(&mut cs, &mut o, 3).unwrap(), 1);
    }

    #[test]
    fn single_candidate_consumes_m_queries() {
        let mut cs = vec![cand(vec![1.0, 0.0])];
        let mut o = StochasticOracle::new(quad(2), NoiseModel::constant(0.1, 0.0), 2, None);
        assert_eq!(select_by_gradient_norm(&mut cs, &mut o, 25).unwrap(), 0);
        assert_eq!(o.calls_used(), 25);
    }

    #[test]
    fn preattached_estimates_are_kept() {
        let pre = Candidate::with_estimate(vec![9.0, 0.0], CandidateSource::Initial, 0.001, 777);
        let mut cs = vec![pre, cand(vec![1.0, 0.0])];
        let mut o = StochasticOracle::new(quad(2), NoiseModel::noiseless(), 1, None);
        let w = select_by_gradient_norm(&mut cs, &mut o, 10).unwrap();
        // only the fresh candidate was sampled
        assert_eq!(o.calls_used(), 10);
        assert_eq!(cs[0].samples_used(), 777);
        assert_eq!(cs[0].estimate(), Some(0.001));
        assert_eq!(w, 0);
    }

    #[test]
    fn ties_break_to_the_lowest_index() {
        let mut cs = vec![cand(vec![1.0, 0.0]), cand(vec![0.0, 1.0])];
        let mut o = StochasticOracle::new(quad(2), NoiseModel::noiseless(), 1, None);
        assert_eq!(select_by_gradient_norm(&mut cs, &mut o, 1).unwrap(), 0);
    }

    #[test]
    fn selection_budget_is_checked_up_front() {
        let mut cs = vec![cand(vec![1.0, 0.0]), cand(vec![2.0, 0.0])];
        let mut o = StochasticOracle::new(quad(2), NoiseModel::noiseless(), 1, Some(19));
        assert!(matches!(
            select_by_value(&mut cs, &mut o, 10),
            Err(EnsembleError::Oracle(OracleError::BudgetExhausted { .. }))
        ));
        assert_eq!(o.calls_used(), 0);
    }

    #[test]
    fn trajectory_sampling_of_singleton_repeats_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = sample_trajectory_candidates(&[vec![5.0]], 3, &mut rng, 1).unwrap();
        assert_eq!(cs.len(), 3);
        assert!(cs.iter().all(|c| c.point == vec![5.0]));
        assert!(cs
            .iter()
            .all(|c| c.source == CandidateSource::TrajectorySample { cell: 1, index: 0 }));
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            sample_trajectory_candidates(&[], 2, &mut rng, 0),
            Err(EnsembleError::EmptyTrajectory)
        ));
    }

    #[test]
    fn trajectory_sampling_is_uniform() {
        // chi-squared test at level 0.01 with 99 degrees of freedom
        let trajectory: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = [0u64; 100];
        for _ in 0..100_000 {
            let c = sample_trajectory_candidates(&trajectory, 1, &mut rng, 0).unwrap();
            counts[c[0].point[0] as usize] += 1;
        }
        let expected = 1000.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.99 quantile of chi-squared with 99 dof
        assert!(stat < 134.642, "chi-squared statistic {stat}");
    }

    #[test]
    fn scale_equivariance_of_value_selection() {
        let points = [vec![3.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]];
        let mut idx = Vec::new();
        for scale in [1.0, 250.0] {
            let p = Arc::new(Problem::quadratic(vec![0.0, 0.0], vec![scale, scale]).unwrap());
            let mut o = StochasticOracle::new(p, NoiseModel::noiseless(), 1, None);
            let mut cs: Vec<Candidate> = points.iter().cloned().map(cand).collect();
            idx.push(select_by_value(&mut cs, &mut o, 2).unwrap());
        }
        assert_eq!(idx[0], idx[1]);
    }
}
