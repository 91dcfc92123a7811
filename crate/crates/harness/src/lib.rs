//! Experiment driver for the grid-search optimizer: config-file experiment
//! setup, seeded sweeps, exhaustive baseline tuning, rate fitting, report
//! emission, and the acceptance suite behind `grasp verify`.

pub mod acceptance;
pub mod config;
pub mod ops;
pub mod report;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Grasp(#[from] grasp_core::grasp::GraspError),
    #[error(transparent)]
    Base(#[from] grasp_core::base::BaseAlgoError),
    #[error(transparent)]
    Oracle(#[from] grasp_core::problems::OracleError),
    #[error(transparent)]
    Problem(#[from] grasp_core::problems::ProblemError),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("tuned metric is zero; relative difference is not applicable")]
    DivisionByZero,
    #[error("window {window} exceeds trajectory length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("ground truth required for harness metrics but absent on problem `{0}`")]
    MissingGroundTruth(String),
}

/// Median of a sample; ties and NaNs resolved by total order.
pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
