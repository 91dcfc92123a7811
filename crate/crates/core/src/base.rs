//! The two base optimizers the grid search wraps: constant-step SGD and the
//! adaptive weighted extragradient method `unixgrad` over a Euclidean ball.
//!
//! Neither optimizer sees the problem directly; their only access is the
//! oracle, so they cannot depend on regularity constants.

use thiserror::Error;

use crate::problems::{OracleError, StochasticOracle};
use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaseAlgoError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Full record of one constant-step SGD run.
///
/// `trajectory[t]` is the iterate the t-th gradient was queried at, so the
/// trajectory has exactly `iterations` points starting at `x0`, and
/// `trajectory[t+1] = trajectory[t] - step_size * gradients[t]` for every
/// consecutive pair of a non-diverged run.
#[derive(Debug, Clone)]
pub struct SgdRun {
    pub step_size: f64,
    pub trajectory: Vec<Vec<f64>>,
    /// Oracle responses in query order, kept for audit.
    pub gradients: Vec<Vec<f64>>,
    /// Set when an update left the finite range; the trajectory is then
    /// frozen at the last finite iterate and querying stops. Budget already
    /// spent stays spent.
    pub diverged: bool,
    /// Gradient queries actually issued.
    pub calls: u64,
}

/// Runs SGD with constant step size for exactly `iterations` gradient
/// queries: `x_{t+1} = x_t - eta * g(x_t)`.
///
/// A step size far above the stability threshold makes iterates explode;
/// that is expected here, because the grid search deliberately probes step
/// sizes up to the inverse of a user floor. Such a run comes back flagged
/// rather than as an error so the ensemble can discard it.
pub fn run_sgd(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    step_size: f64,
    iterations: u64,
) -> Result<SgdRun, BaseAlgoError> {
    if step_size.is_nan() || step_size <= 0.0 || !step_size.is_finite() {
        return Err(BaseAlgoError::InvalidInput(
            "step size must be positive and finite".into(),
        ));
    }
    if iterations == 0 {
        return Err(BaseAlgoError::InvalidInput(
            "iterations must be >= 1".into(),
        ));
    }
    if !vector::all_finite(x0) {
        return Err(BaseAlgoError::InvalidInput("x0 must be finite".into()));
    }
    if oracle.remaining() < iterations {
        return Err(OracleError::BudgetExhausted {
            used: oracle.calls_used(),
            cap: oracle.budget_cap().unwrap_or(u64::MAX),
        }
        .into());
    }
    let mut trajectory = Vec::with_capacity(iterations as usize);
    let mut gradients = Vec::with_capacity(iterations as usize);
    let mut x = x0.to_vec();
    let mut diverged = false;
    let mut calls = 0u64;
    for t in 0..iterations {
        trajectory.push(x.clone());
        if diverged {
            continue;
        }
        let g = oracle.query_gradient(&x)?;
        calls += 1;
        gradients.push(g);
        if t + 1 < iterations {
            let next = vector::axpy(&x, -step_size, gradients.last().unwrap());
            if vector::all_finite(&next) {
                x = next;
            } else {
                diverged = true;
            }
        }
    }
    Ok(SgdRun {
        step_size,
        trajectory,
        gradients,
        diverged,
        calls,
    })
}

/// Ball-constrained proximal step: minimizes
/// `<direction, x> + ||x - anchor||^2 / (2 * scale)` over the ball of
/// `radius` about `center`. Closed form: project `anchor - scale*direction`
/// onto the ball.
pub fn prox_step(
    anchor: &[f64],
    direction: &[f64],
    scale: f64,
    center: &[f64],
    radius: f64,
) -> Vec<f64> {
    debug_assert!(scale > 0.0 && radius > 0.0);
    let free = vector::axpy(anchor, -scale, direction);
    vector::project_ball(&free, center, radius)
}

/// Result of a `unixgrad` run: the weighted-average output plus the step
/// sizes taken.
#[derive(Debug, Clone)]
pub struct UnixGradRun {
    pub output: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// Gradient queries issued (always `2 * pairs`).
    pub calls: u64,
}

/// Full iterate record for invariant checks; produced by
/// [`run_unixgrad_traced`].
#[derive(Debug, Clone)]
pub struct UnixGradTrace {
    pub run: UnixGradRun,
    /// Primal iterates `x_t`.
    pub primal: Vec<Vec<f64>>,
    /// Auxiliary iterates (prox anchors).
    pub auxiliary: Vec<Vec<f64>>,
    /// Hint points the first gradient of each pair is taken at.
    pub hints: Vec<Vec<f64>>,
    /// Weighted averages; the last one is the output.
    pub averaged: Vec<Vec<f64>>,
}

/// Adaptive weighted extragradient over the ball `||x - x0|| <= diameter`.
///
/// Iteration `t` (weights `alpha_t = t`) takes two gradient queries: one at
/// the hint point to produce the primal iterate, one at the running weighted
/// average to advance the anchor. The step size is
/// `2 D / sqrt(1 + sum_s alpha_s^2 ||g(avg_s) - g(hint_s)||^2)` over past
/// iterations, so it is nonincreasing. Returns the weighted average of the
/// primal iterates after `pairs` iterations and consumes exactly `2 * pairs`
/// queries.
pub fn run_unixgrad(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    diameter: f64,
    pairs: u64,
) -> Result<UnixGradRun, BaseAlgoError> {
    Ok(unixgrad_impl(oracle, x0, diameter, pairs, false)?.run)
}

/// As [`run_unixgrad`], recording every internal sequence.
pub fn run_unixgrad_traced(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    diameter: f64,
    pairs: u64,
) -> Result<UnixGradTrace, BaseAlgoError> {
    unixgrad_impl(oracle, x0, diameter, pairs, true)
}

fn unixgrad_impl(
    oracle: &mut StochasticOracle,
    x0: &[f64],
    diameter: f64,
    pairs: u64,
    trace: bool,
) -> Result<UnixGradTrace, BaseAlgoError> {
    if diameter.is_nan() || diameter <= 0.0 || !diameter.is_finite() {
        return Err(BaseAlgoError::InvalidInput(
            "diameter must be positive and finite".into(),
        ));
    }
    if pairs == 0 {
        return Err(BaseAlgoError::InvalidInput("pairs must be >= 1".into()));
    }
    if !vector::all_finite(x0) {
        return Err(BaseAlgoError::InvalidInput("x0 must be finite".into()));
    }
    if oracle.remaining() < 2 * pairs {
        return Err(OracleError::BudgetExhausted {
            used: oracle.calls_used(),
            cap: oracle.budget_cap().unwrap_or(u64::MAX),
        }
        .into());
    }

    let dim = x0.len();
    let mut hat = x0.to_vec(); // prox anchor
    let mut weighted_sum = vec![0.0; dim]; // sum_{s<t} alpha_s x_s
                                           // gradient-difference accumulator with compensated summation
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    let mut step_sizes = Vec::with_capacity(pairs as usize);
    let mut avg = x0.to_vec();
    let mut tr = UnixGradTrace {
        run: UnixGradRun {
            output: Vec::new(),
            step_sizes: Vec::new(),
            calls: 0,
        },
        primal: Vec::new(),
        auxiliary: Vec::new(),
        hints: Vec::new(),
        averaged: Vec::new(),
    };

    for t in 1..=pairs {
        let alpha = t as f64;
        let alpha_sum = 0.5 * alpha * (alpha + 1.0);
        let eta = 2.0 * diameter / (1.0 + acc).sqrt();
        step_sizes.push(eta);

        // hint point: weighted average with the anchor standing in for x_t
        let hint: Vec<f64> = (0..dim)
            .map(|j| (alpha * hat[j] + weighted_sum[j]) / alpha_sum)
            .collect();
        let g_hint = oracle.query_gradient(&hint)?;
        let x_t = prox_step(&hat, &g_hint, eta * alpha, x0, diameter);

        avg = (0..dim)
            .map(|j| (alpha * x_t[j] + weighted_sum[j]) / alpha_sum)
            .collect();
        let g_avg = oracle.query_gradient(&avg)?;
        let next_hat = prox_step(&hat, &g_avg, eta * alpha, x0, diameter);

        let diff_sq = vector::sub(&g_avg, &g_hint)
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
        // Kahan step
        let y = alpha * alpha * diff_sq - comp;
        let s = acc + y;
        comp = (s - acc) - y;
        acc = s;

        vector::axpy_mut(&mut weighted_sum, alpha, &x_t);
        if trace {
            tr.auxiliary.push(hat.clone());
            tr.hints.push(hint);
            tr.primal.push(x_t);
            tr.averaged.push(avg.clone());
        }
        hat = next_hat;
    }

    tr.run = UnixGradRun {
        output: avg,
        step_sizes,
        calls: 2 * pairs,
    };
    Ok(tr)
}
