//! The four grid-search orchestrators.

use crate::base::{run_sgd, run_unixgrad};
use crate::ensemble::{self, Candidate, CandidateSource};
use crate::exec;
use crate::problems::StochasticOracle;
use crate::vector;

use super::{
    basel_budgets, c_stage_budgets, harmonic_budgets, isqrt_ceil, mul_pow2, nc_stage_budgets,
    samples_per_cell, selfbound_c_dmax, selfbound_nc_ranges, DmaxOption, GraspError, GraspResult,
    OracleLedger, RangeReport, SearchGrid, UserInputs,
};

/// Deterministic convex search: one exact gradient query bounds the initial
/// distance, a geometric grid of ball diameters with harmonically scheduled
/// budgets runs `unixgrad` per cell, and exact value queries pick the winner
/// among the cell outputs and the start point.
///
/// Requires a noiseless oracle. The single initial query and the final
/// selection queries are reserved out of the budget before the grid is
/// scheduled, so the ledger never exceeds the budget.
pub fn grasp_deterministic(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    inputs: &UserInputs,
) -> Result<GraspResult, GraspError> {
    inputs.validate(1.0)?;
    if !oracle.is_noiseless() {
        return Err(GraspError::InvalidInputs(
            "the deterministic orchestrator requires a noiseless oracle".into(),
        ));
    }
    let t = inputs.budget;
    let mut ledger = OracleLedger::default();
    let mut ranges = RangeReport::default();

    let g0 = oracle.query_gradient(x0)?;
    ledger.record("initial_gradient", 1);
    let g0_norm = vector::norm(&g0);
    if g0_norm == 0.0 {
        return Ok(GraspResult::degenerate_at(x0, ledger, ranges));
    }

    let d_max = selfbound_c_dmax(DmaxOption::GradientBased, g0_norm, 0.0, inputs, t)?;
    ranges.d_max = Some(d_max);
    let grid = SearchGrid::geometric(inputs.distance_floor, d_max)?;
    let n = grid.len();

    // one initial gradient + one exact value per candidate
    let reserve = 1 + (n as u64 + 1);
    if t <= reserve {
        return Err(GraspError::InsufficientBudget(format!(
            "budget {t} cannot cover initial query and selection over {n} cells"
        )));
    }
    let budgets = harmonic_budgets(n, t - reserve);

    let mut jobs = Vec::new();
    for cell in 1..=n {
        let b = budgets[cell - 1];
        let pairs = b / 2;
        let diameter = grid.value(cell);
        if pairs >= 1 && diameter.is_finite() {
            jobs.push((cell, diameter, pairs, oracle.derive(Some(b))));
        }
    }
    let cell_results = exec::map_items(jobs, |(cell, diameter, pairs, mut child)| {
        let out = run_unixgrad(&mut child, x0, diameter, pairs);
        (cell, out, child.calls_used())
    });

    let mut candidates = vec![Candidate::new(x0.to_vec(), CandidateSource::Initial)];
    for (cell, out, calls) in cell_results {
        oracle.record_calls(calls);
        ledger.record(format!("cell_{cell}"), calls);
        candidates.push(Candidate::new(
            out?.output,
            CandidateSource::GridCell { cell },
        ));
    }

    let before = oracle.calls_used();
    let winner = ensemble::select_by_value(&mut candidates, oracle, 1)?;
    ledger.record("estimation", oracle.calls_used() - before);

    Ok(GraspResult {
        output: candidates[winner].point.clone(),
        selected: candidates[winner].source.clone(),
        candidates,
        ledger,
        ranges,
        cells: n,
        samples_per_cell: 0,
        estimation_samples: 1,
        degenerate: false,
    })
}

/// Non-convex search over SGD step sizes.
///
/// Stages: (i) initial gradient sampling at the start point (default one
/// quarter of the budget); (ii) self-bounding step-size ranges from the
/// estimated gradient norm; (iii) one constant-step SGD per grid cell on an
/// equal slice of two thirds of the remainder; (iv) uniform trajectory
/// sampling of each run; (v) averaged gradient estimation of every sampled
/// candidate on the last third; (vi) selection by smallest estimated
/// gradient norm, the start point keeping its stage-(i) estimate.
pub fn grasp_nc(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    inputs: &UserInputs,
) -> Result<GraspResult, GraspError> {
    inputs.validate(1.0 / 3.0)?;
    let t = inputs.budget;
    let (num, den) = inputs.fraction_or((1, 4));
    let m0 = t.saturating_mul(num as u64) / den as u64;
    if m0 == 0 {
        return Err(GraspError::InsufficientBudget(
            "initial sampling stage receives zero calls".into(),
        ));
    }
    let mut ledger = OracleLedger::default();
    let g0_hat = ensemble::average_gradient(oracle, x0, m0)?;
    ledger.record("initial_gradient", m0);
    let g0_norm = vector::norm(&g0_hat);
    if g0_norm == 0.0 {
        let mut res = GraspResult::degenerate_at(x0, ledger, RangeReport::default());
        res.candidates = vec![Candidate::with_estimate(
            x0.to_vec(),
            CandidateSource::Initial,
            0.0,
            m0,
        )];
        return Ok(res);
    }

    let nc = selfbound_nc_ranges(g0_norm, t, inputs)?;
    let ranges = RangeReport {
        l_max: Some(nc.l_max),
        f_max: Some(nc.f_max),
        delta_sq_max: Some(nc.delta_sq_max),
        eta_min: Some(nc.eta_min),
        eta_max: Some(nc.eta_max),
        d_max: None,
    };
    let grid = SearchGrid::geometric(nc.eta_min, nc.eta_max)?;
    let n = grid.len();
    let k = samples_per_cell(inputs.confidence);
    let (per_cell, per_cand) = nc_stage_budgets(t, m0, n as u64, k);
    if per_cell == 0 || per_cand == 0 {
        return Err(GraspError::InsufficientBudget(format!(
            "budget {t} over {n} cells with {k} samples each leaves an empty stage"
        )));
    }

    let mut jobs = Vec::new();
    for cell in 1..=n {
        let child = oracle.derive(Some(per_cell));
        let sampler = oracle.derive_rng();
        jobs.push((cell, grid.value(cell), child, sampler));
    }
    let cell_results = exec::map_items(jobs, |(cell, step, mut child, mut sampler)| {
        let out: Result<Vec<Candidate>, GraspError> = (|| {
            let run = run_sgd(&mut child, x0, step, per_cell)?;
            Ok(ensemble::sample_trajectory_candidates(
                &run.trajectory,
                k,
                &mut sampler,
                cell,
            )?)
        })();
        (cell, out, child.calls_used())
    });

    let mut candidates = vec![Candidate::with_estimate(
        x0.to_vec(),
        CandidateSource::Initial,
        g0_norm,
        m0,
    )];
    for (cell, out, calls) in cell_results {
        oracle.record_calls(calls);
        ledger.record(format!("cell_{cell}"), calls);
        candidates.extend(out?);
    }

    let before = oracle.calls_used();
    let winner = ensemble::select_by_gradient_norm(&mut candidates, oracle, per_cand)?;
    ledger.record("estimation", oracle.calls_used() - before);

    Ok(GraspResult {
        output: candidates[winner].point.clone(),
        selected: candidates[winner].source.clone(),
        candidates,
        ledger,
        ranges,
        cells: n,
        samples_per_cell: k,
        estimation_samples: per_cand,
        degenerate: false,
    })
}

/// Convex search over ball diameters with noisy value selection.
///
/// Stages: initial gradient and value sampling at the start point (default
/// one eighth of the budget each); the distance search bound from either the
/// gradient estimate or the value estimate above a user lower bound; one
/// `unixgrad` per cell under a harmonic schedule of two thirds of the
/// remainder; averaged value estimation of the cell outputs on the last
/// third; selection by smallest estimated value, the start point keeping its
/// initial estimate.
pub fn grasp_c(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    inputs: &UserInputs,
) -> Result<GraspResult, GraspError> {
    inputs.validate(0.5)?;
    if inputs.dmax_option == DmaxOption::ValueBased && inputs.value_lower_bound.is_none() {
        return Err(GraspError::MissingLowerBound);
    }
    let t = inputs.budget;
    let (num, den) = inputs.fraction_or((1, 8));
    let m_init = t.saturating_mul(num as u64) / den as u64;
    if m_init == 0 {
        return Err(GraspError::InsufficientBudget(
            "initial sampling stage receives zero calls".into(),
        ));
    }
    let mut ledger = OracleLedger::default();
    let g0_hat = ensemble::average_gradient(oracle, x0, m_init)?;
    ledger.record("initial_gradient", m_init);
    let l0_hat = ensemble::average_value(oracle, x0, m_init)?;
    ledger.record("initial_value", m_init);
    let g0_norm = vector::norm(&g0_hat);

    let collapsed = match inputs.dmax_option {
        DmaxOption::GradientBased => g0_norm == 0.0,
        DmaxOption::ValueBased => {
            l0_hat - inputs.value_lower_bound.expect("validated above") <= 0.0
        }
    };
    if collapsed {
        let mut res = GraspResult::degenerate_at(x0, ledger, RangeReport::default());
        res.candidates = vec![Candidate::with_estimate(
            x0.to_vec(),
            CandidateSource::Initial,
            l0_hat,
            m_init,
        )];
        return Ok(res);
    }

    let d_max = selfbound_c_dmax(inputs.dmax_option, g0_norm, l0_hat, inputs, t)?;
    let ranges = RangeReport {
        d_max: Some(d_max),
        ..RangeReport::default()
    };
    let grid = SearchGrid::geometric(inputs.distance_floor, d_max)?;
    let n = grid.len();
    let (grid_total, per_cand) = c_stage_budgets(t, 2 * m_init, n as u64);
    if per_cand == 0 {
        return Err(GraspError::InsufficientBudget(format!(
            "budget {t} over {n} cells leaves no value-estimation samples"
        )));
    }
    let budgets = harmonic_budgets(n, grid_total);

    let mut jobs = Vec::new();
    for cell in 1..=n {
        let b = budgets[cell - 1];
        let pairs = b / 2;
        let diameter = grid.value(cell);
        if pairs >= 1 && diameter.is_finite() {
            jobs.push((cell, diameter, pairs, oracle.derive(Some(b))));
        }
    }
    let cell_results = exec::map_items(jobs, |(cell, diameter, pairs, mut child)| {
        let out = run_unixgrad(&mut child, x0, diameter, pairs);
        (cell, out, child.calls_used())
    });

    let mut candidates = vec![Candidate::with_estimate(
        x0.to_vec(),
        CandidateSource::Initial,
        l0_hat,
        m_init,
    )];
    for (cell, out, calls) in cell_results {
        oracle.record_calls(calls);
        ledger.record(format!("cell_{cell}"), calls);
        candidates.push(Candidate::new(
            out?.output,
            CandidateSource::GridCell { cell },
        ));
    }

    let before = oracle.calls_used();
    let winner = ensemble::select_by_value(&mut candidates, oracle, per_cand)?;
    ledger.record("estimation", oracle.calls_used() - before);

    Ok(GraspResult {
        output: candidates[winner].point.clone(),
        selected: candidates[winner].source.clone(),
        candidates,
        ledger,
        ranges,
        cells: n,
        samples_per_cell: 0,
        estimation_samples: per_cand,
        degenerate: false,
    })
}

/// Convex search without any value lower bound: square-root-many cells with
/// inverse-square budget decay, and a flat per-candidate value-sampling
/// budget of `T / (2 (N + 1))` covering the start point too.
pub fn grasp_c_nolb(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    inputs: &UserInputs,
) -> Result<GraspResult, GraspError> {
    inputs.validate(0.5)?;
    let t = inputs.budget;
    let n = isqrt_ceil(t);
    let m_val = t / (2 * (n + 1));
    let budgets = basel_budgets(n as usize, t);
    if m_val == 0 || budgets[0] == 0 {
        return Err(GraspError::InsufficientBudget(format!(
            "budget {t} cannot feed {n} cells and per-candidate value sampling"
        )));
    }
    let mut ledger = OracleLedger::default();
    let l0_hat = ensemble::average_value(oracle, x0, m_val)?;
    ledger.record("initial_value", m_val);

    let mut jobs = Vec::new();
    for cell in 1..=n {
        let b = budgets[cell as usize - 1];
        let pairs = b / 2;
        let diameter = mul_pow2(inputs.distance_floor, cell);
        if pairs >= 1 && diameter.is_finite() {
            jobs.push((cell as usize, diameter, pairs, oracle.derive(Some(b))));
        }
    }
    let cell_results = exec::map_items(jobs, |(cell, diameter, pairs, mut child)| {
        let out = run_unixgrad(&mut child, x0, diameter, pairs);
        (cell, out, child.calls_used())
    });

    let mut candidates = vec![Candidate::with_estimate(
        x0.to_vec(),
        CandidateSource::Initial,
        l0_hat,
        m_val,
    )];
    for (cell, out, calls) in cell_results {
        oracle.record_calls(calls);
        ledger.record(format!("cell_{cell}"), calls);
        candidates.push(Candidate::new(
            out?.output,
            CandidateSource::GridCell { cell },
        ));
    }

    let before = oracle.calls_used();
    let winner = ensemble::select_by_value(&mut candidates, oracle, m_val)?;
    ledger.record("estimation", oracle.calls_used() - before);

    Ok(GraspResult {
        output: candidates[winner].point.clone(),
        selected: candidates[winner].source.clone(),
        candidates,
        ledger,
        ranges: RangeReport::default(),
        cells: n as usize,
        samples_per_cell: 0,
        estimation_samples: m_val,
        degenerate: false,
    })
}
