//! Parameter-free stochastic optimization by grid search with self-bounding
//! search ranges.
//!
//! The crate is organized around a hard separation between what an algorithm
//! may see and what only the benchmark harness may see:
//!
//! * [`problems`] defines synthetic objectives with exact ground truth
//!   (optimum, regularity constants) plus bounded-noise models and the
//!   budgeted [`problems::StochasticOracle`]. The oracle is the *only*
//!   problem access granted to optimizers.
//! * [`base`] implements the two base optimizers the grid search wraps:
//!   constant-step SGD and the adaptive extragradient method `unixgrad`
//!   over a Euclidean ball.
//! * [`ensemble`] implements averaged oracle estimation and candidate
//!   selection by smallest estimated gradient norm or function value.
//! * [`grasp`] implements the search-range computations, geometric grids,
//!   budget schedules, and the four grid-search orchestrators.
//! * [`exec`] provides the data-parallel map used for independent grid
//!   cells; with the `parallel` feature disabled everything runs on the
//!   calling thread and produces bit-identical results.

pub mod base;
pub mod ensemble;
pub mod exec;
pub mod grasp;
pub mod problems;
pub mod vector;
