//! Grid search with self-bounding search ranges.
//!
//! The orchestrators in this module are parameter-free: their only inputs
//! are the oracle, the start point, and [`UserInputs`] (budget, confidence,
//! and strictly positive user floors that can be arbitrarily small). They
//! never read problem regularity fields.
//!
//! Each orchestrator follows the same pipeline: estimate the gradient (and
//! possibly value) at the start point, convert that estimate into a
//! computable search range for the unknown problem parameter, discretize the
//! range geometrically, run a base optimizer per cell on an independently
//! seeded slice of the budget, and select the best candidate — the start
//! point always among them — by ensemble estimation.

mod orchestrators;

pub use orchestrators::{grasp_c, grasp_c_nolb, grasp_deterministic, grasp_nc};

use thiserror::Error;

use crate::base::BaseAlgoError;
use crate::ensemble::{Candidate, CandidateSource, EnsembleError};
use crate::problems::OracleError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Base(#[from] BaseAlgoError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("insufficient budget: {0}")]
    InsufficientBudget(String),
    #[error("estimated gradient at the start point is zero; the search ranges collapse")]
    DegenerateGradient,
    #[error("the chosen range option requires a value lower bound")]
    MissingLowerBound,
    #[error("invalid inputs: {0}")]
    InvalidInputs(String),
}

/// Which search upper bound the convex orchestrator derives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaxOption {
    /// From the estimated gradient norm at the start point.
    GradientBased,
    /// From the estimated value at the start point minus a user lower bound
    /// on the optimal value.
    ValueBased,
}

/// The only algorithm parameters permitted: budget, confidence, and strictly
/// positive user floors. Floors need not satisfy any condition involving the
/// true problem constants.
#[derive(Debug, Clone)]
pub struct UserInputs {
    /// Total oracle-call budget `T`.
    pub budget: u64,
    /// Confidence level `delta`.
    pub confidence: f64,
    /// Smoothness floor (`L` floor).
    pub smoothness_floor: f64,
    /// Initial-gap floor (`F` floor).
    pub gap_floor: f64,
    /// Initial-distance floor (`d` floor).
    pub distance_floor: f64,
    /// Lower bound on the optimal value, required by the value-based range
    /// option.
    pub value_lower_bound: Option<f64>,
    /// Range option for the convex orchestrator.
    pub dmax_option: DmaxOption,
    /// Fraction of the budget spent estimating at the start point, as a
    /// rational in (0, 1]. `None` selects the per-orchestrator default.
    pub initial_fraction: Option<(u32, u32)>,
}

impl UserInputs {
    pub fn new(budget: u64, confidence: f64) -> Self {
        UserInputs {
            budget,
            confidence,
            smoothness_floor: 1e-3,
            gap_floor: 1e-3,
            distance_floor: 1e-3,
            value_lower_bound: None,
            dmax_option: DmaxOption::GradientBased,
            initial_fraction: None,
        }
    }

    pub(crate) fn validate(&self, confidence_sup: f64) -> Result<(), GraspError> {
        if self.budget == 0 {
            return Err(GraspError::InvalidInputs("budget must be >= 1".into()));
        }
        for (name, v) in [
            ("smoothness_floor", self.smoothness_floor),
            ("gap_floor", self.gap_floor),
            ("distance_floor", self.distance_floor),
        ] {
            if v.is_nan() || v <= 0.0 || !v.is_finite() {
                return Err(GraspError::InvalidInputs(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if self.confidence.is_nan() || self.confidence <= 0.0 || self.confidence >= confidence_sup {
            return Err(GraspError::InvalidInputs(format!(
                "confidence must lie in (0, {confidence_sup})"
            )));
        }
        if let Some((num, den)) = self.initial_fraction {
            if num == 0 || den == 0 || num > den {
                return Err(GraspError::InvalidInputs(
                    "initial_fraction must be a rational in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn fraction_or(&self, default: (u32, u32)) -> (u32, u32) {
        self.initial_fraction.unwrap_or(default)
    }
}

/// `x * 2^e` without overflowing the intermediate power.
pub(crate) fn mul_pow2(x: f64, e: u64) -> f64 {
    let mut v = x;
    let mut rem = e;
    while rem > 0 {
        let c = rem.min(512);
        v *= (2.0f64).powi(c as i32);
        rem -= c;
        if !v.is_finite() {
            return v;
        }
    }
    v
}

/// Geometric grid `v_i = lo * 2^i`, `i = 1..N`, covering `[lo, hi]`.
///
/// `N = ceil(log2(hi / lo))` when `hi > lo`; otherwise a degenerate single
/// cell at `2 lo`. Every target in `[lo, hi]` has a cell with
/// `v_i / 2 <= target <= v_i`.
#[derive(Debug, Clone)]
pub struct SearchGrid {
    pub lo: f64,
    pub hi: f64,
    values: Vec<f64>,
}

impl SearchGrid {
    pub fn geometric(lo: f64, hi: f64) -> Result<Self, GraspError> {
        if lo.is_nan() || lo <= 0.0 || !lo.is_finite() || hi.is_nan() || hi <= 0.0 {
            return Err(GraspError::InvalidInputs(
                "grid bounds must be positive with finite lower bound".into(),
            ));
        }
        let n = if hi <= lo {
            1u64
        } else if hi.is_infinite() {
            return Err(GraspError::InvalidInputs(
                "grid upper bound overflowed".into(),
            ));
        } else {
            let mut n = (hi / lo).log2().ceil().max(1.0) as u64;
            // guard the ceiling against floating-point log error
            while mul_pow2(lo, n) < hi && n < 4400 {
                n += 1;
            }
            while n > 1 && mul_pow2(lo, n - 1) >= hi {
                n -= 1;
            }
            n
        };
        let values = (1..=n).map(|i| mul_pow2(lo, i)).collect();
        Ok(SearchGrid { lo, hi, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// 1-based index of the value for cell `i`.
    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell - 1]
    }

    /// 1-based cell index whose value covers `target` within a factor two,
    /// for targets in `[lo, hi]`.
    pub fn cell_covering(&self, target: f64) -> Option<usize> {
        if target.is_nan() || target < self.lo || target > self.hi.max(self.values[0]) {
            return None;
        }
        let mut i =
            ((target / self.lo).log2().ceil().max(1.0) as usize).clamp(1, self.values.len());
        while i < self.values.len() && self.value(i) < target {
            i += 1;
        }
        while i > 1 && self.value(i - 1) >= target {
            i -= 1;
        }
        let v = self.value(i);
        (v / 2.0 <= target && target <= v).then_some(i)
    }
}

/// Budget allocation rule over grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// `T_i = floor(cap / N)`.
    Uniform,
    /// `T_i = floor(cap / (i (1 + ln N)))`.
    Harmonic,
    /// `T_i = floor(cap / (i^2 pi^2 / 3))`.
    Basel,
}

/// Per-cell oracle budgets with a certified total.
#[derive(Debug, Clone)]
pub struct BudgetSchedule {
    pub kind: ScheduleKind,
    pub budgets: Vec<u64>,
    pub total_cap: u64,
}

impl BudgetSchedule {
    pub fn total(&self) -> u64 {
        self.budgets.iter().sum()
    }
}

pub(crate) fn uniform_budgets(n: usize, cap: u64) -> Vec<u64> {
    vec![cap / n as u64; n]
}

pub(crate) fn harmonic_budgets(n: usize, cap: u64) -> Vec<u64> {
    let denom = 1.0 + (n as f64).ln();
    (1..=n)
        .map(|i| (cap as f64 / (i as f64 * denom)).floor() as u64)
        .collect()
}

pub(crate) fn basel_budgets(n: usize, cap: u64) -> Vec<u64> {
    let c = std::f64::consts::PI.powi(2) / 3.0;
    (1..=n)
        .map(|i| (cap as f64 / (c * (i as f64) * (i as f64))).floor() as u64)
        .collect()
}

/// Allocates `total_cap` over `n` cells by the given rule. Every cell must
/// receive at least one call; the returned schedule certifies
/// `sum(T_i) <= total_cap`.
pub fn allocate_budget(
    n: usize,
    total_cap: u64,
    kind: ScheduleKind,
) -> Result<BudgetSchedule, GraspError> {
    if n == 0 {
        return Err(GraspError::InvalidInputs(
            "schedule needs at least one cell".into(),
        ));
    }
    if total_cap < n as u64 {
        return Err(GraspError::InsufficientBudget(format!(
            "cap {total_cap} cannot give {n} cells one call each"
        )));
    }
    let budgets = match kind {
        ScheduleKind::Uniform => uniform_budgets(n, total_cap),
        ScheduleKind::Harmonic => harmonic_budgets(n, total_cap),
        ScheduleKind::Basel => basel_budgets(n, total_cap),
    };
    if budgets.contains(&0) {
        return Err(GraspError::InsufficientBudget(format!(
            "cap {total_cap} leaves an empty cell under {kind:?} allocation over {n} cells"
        )));
    }
    let schedule = BudgetSchedule {
        kind,
        budgets,
        total_cap,
    };
    debug_assert!(schedule.total() <= total_cap);
    Ok(schedule)
}

/// Search ranges for the non-convex orchestrator, derived from the estimated
/// gradient norm at the start point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcRanges {
    pub l_max: f64,
    pub f_max: f64,
    pub delta_sq_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

/// Self-bounding ranges for the step-size search: caps on smoothness, gap,
/// and squared noise that would each make the target rate worse than the
/// start-point benchmark, then the implied step-size bracket.
/// Guarantees `eta_min <= eta_max`.
pub fn selfbound_nc_ranges(
    g0_norm: f64,
    budget: u64,
    inputs: &UserInputs,
) -> Result<NcRanges, GraspError> {
    if g0_norm.is_nan() || g0_norm < 0.0 {
        return Err(GraspError::InvalidInputs(
            "gradient norm must be nonnegative".into(),
        ));
    }
    if g0_norm == 0.0 {
        return Err(GraspError::DegenerateGradient);
    }
    let t = budget as f64;
    let g_sq = g0_norm * g0_norm;
    let l_max = g_sq * t / inputs.gap_floor;
    let f_max = g_sq * t / inputs.smoothness_floor;
    let delta_sq_max = g_sq * t / (1.0 / inputs.confidence).ln();
    let l_cap = inputs.smoothness_floor.max(l_max);
    let eta_max = 1.0 / (2.0 * inputs.smoothness_floor);
    let eta_min =
        (1.0 / (2.0 * l_cap)).min((2.0 * inputs.gap_floor / (l_cap * delta_sq_max * t)).sqrt());
    debug_assert!(eta_min <= eta_max);
    Ok(NcRanges {
        l_max,
        f_max,
        delta_sq_max,
        eta_min,
        eta_max,
    })
}

/// Self-bounding search upper bound for the initial distance.
///
/// Gradient-based: `max(d_floor, g0_norm T^2 / L_floor)`. Value-based:
/// `max(1, d_floor, (l0_hat - lower_bound) T^2 / L_floor)`, which requires a
/// user lower bound on the optimal value.
pub fn selfbound_c_dmax(
    option: DmaxOption,
    g0_norm: f64,
    l0_hat: f64,
    inputs: &UserInputs,
    budget: u64,
) -> Result<f64, GraspError> {
    let t = budget as f64;
    match option {
        DmaxOption::GradientBased => Ok(inputs
            .distance_floor
            .max(g0_norm * t * t / inputs.smoothness_floor)),
        DmaxOption::ValueBased => {
            let lb = inputs
                .value_lower_bound
                .ok_or(GraspError::MissingLowerBound)?;
            if !l0_hat.is_finite() {
                return Err(GraspError::InvalidInputs(
                    "value estimate is not finite".into(),
                ));
            }
            Ok(1.0f64
                .max(inputs.distance_floor)
                .max((l0_hat - lb) * t * t / inputs.smoothness_floor))
        }
    }
}

/// Per-stage oracle-call ledger of one orchestrator run. Entries are
/// disjoint, so their sum is the total spend.
#[derive(Debug, Clone, Default)]
pub struct OracleLedger {
    entries: Vec<(String, u64)>,
}

impl OracleLedger {
    pub fn record(&mut self, stage: impl Into<String>, calls: u64) {
        self.entries.push((stage.into(), calls));
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn get(&self, stage: &str) -> u64 {
        self.entries
            .iter()
            .filter(|(s, _)| s == stage)
            .map(|(_, c)| c)
            .sum()
    }

    /// Sum over stages with the given prefix.
    pub fn get_prefixed(&self, prefix: &str) -> u64 {
        self.entries
            .iter()
            .filter(|(s, _)| s.starts_with(prefix))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

/// Computed search ranges echoed into the run result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RangeReport {
    pub l_max: Option<f64>,
    pub f_max: Option<f64>,
    pub delta_sq_max: Option<f64>,
    pub eta_min: Option<f64>,
    pub eta_max: Option<f64>,
    pub d_max: Option<f64>,
}

/// Output of one orchestrator run.
#[derive(Debug, Clone)]
pub struct GraspResult {
    pub output: Vec<f64>,
    pub selected: CandidateSource,
    pub candidates: Vec<Candidate>,
    pub ledger: OracleLedger,
    pub ranges: RangeReport,
    /// Grid cell count `N`.
    pub cells: usize,
    /// Trajectory samples per cell `K` (zero when unused).
    pub samples_per_cell: u64,
    /// Estimation samples attached per fresh candidate.
    pub estimation_samples: u64,
    /// Set when the run short-circuited to the start point because the
    /// search ranges collapsed.
    pub degenerate: bool,
}

impl GraspResult {
    pub(crate) fn degenerate_at(x0: &[f64], ledger: OracleLedger, ranges: RangeReport) -> Self {
        GraspResult {
            output: x0.to_vec(),
            selected: CandidateSource::Initial,
            candidates: vec![Candidate::new(x0.to_vec(), CandidateSource::Initial)],
            ledger,
            ranges,
            cells: 0,
            samples_per_cell: 0,
            estimation_samples: 0,
            degenerate: true,
        }
    }
}

/// Stage budgets for the non-convex orchestrator given total budget `t`,
/// initial spend `m0`, `n` cells, and `k` samples per cell: the remainder
/// splits two-to-one between the grid stage and candidate estimation,
/// matching the quarter/half/quarter split at the default initial fraction.
/// Returns (per-cell SGD budget, per-candidate estimation samples).
pub(crate) fn nc_stage_budgets(t: u64, m0: u64, n: u64, k: u64) -> (u64, u64) {
    let r = t.saturating_sub(m0);
    let grid_total = 2 * r / 3;
    let est_total = r - grid_total;
    (grid_total / n, est_total / (k * n))
}

/// Stage budgets for the convex orchestrator: remainder after initial
/// sampling splits two-to-one between the grid stage (harmonic over cells)
/// and per-candidate value estimation. Returns (grid total, per-candidate
/// samples).
pub(crate) fn c_stage_budgets(t: u64, m_init: u64, n: u64) -> (u64, u64) {
    let r = t.saturating_sub(m_init);
    let grid_total = 2 * r / 3;
    let est_total = r - grid_total;
    (grid_total, est_total / n)
}

/// Ceiling of `log2(1/delta)`, at least one.
pub(crate) fn samples_per_cell(confidence: f64) -> u64 {
    ((1.0 / confidence).log2().ceil() as u64).max(1)
}

/// Ceiling square root.
pub(crate) fn isqrt_ceil(t: u64) -> u64 {
    let mut n = (t as f64).sqrt().ceil() as u64;
    while n > 1 && (n - 1) * (n - 1) >= t {
        n -= 1;
    }
    while n * n < t {
        n += 1;
    }
    n.max(1)
}
