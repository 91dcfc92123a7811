//! The budgeted stochastic oracle: the sole algorithm-facing interface.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::noise::NoiseModel;
use super::{standard_normal, Problem};
use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle budget exhausted: {used} of {cap} calls already spent")]
    BudgetExhausted { used: u64, cap: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("query point has non-finite entries")]
    NonFiniteInput,
    #[error("gap-scaled value noise requires a problem with ground truth")]
    MissingGroundTruth,
    #[error("noise profile has no closed-form radial maximum")]
    UnsupportedProfile,
}

/// Seeded, budgeted access to noisy gradients and values of one problem.
///
/// Every gradient or value query increments the call counter by exactly one;
/// a query that would exceed the budget cap is rejected, never silently
/// served. Two oracles with the same seed and stream produce bit-identical
/// responses to identical query sequences.
///
/// Sub-seeding: [`derive`](Self::derive) hands out children whose random
/// streams are `mix(parent_stream, k)` for the parent's k-th child, where
/// `mix` is the SplitMix64 finalizer. Children are therefore reproducible
/// functions of the root seed and the derivation order alone, independent of
/// how much randomness the parent has consumed and of any scheduling.
pub struct StochasticOracle {
    problem: Arc<Problem>,
    noise: NoiseModel,
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
    children: u64,
    calls_used: u64,
    budget_cap: Option<u64>,
}

impl StochasticOracle {
    pub fn new(problem: Arc<Problem>, noise: NoiseModel, seed: u64, budget: Option<u64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        StochasticOracle {
            problem,
            noise,
            rng,
            seed,
            stream: 0,
            children: 0,
            calls_used: 0,
            budget_cap: budget,
        }
    }

    /// Child oracle over the same problem and noise model with its own
    /// budget and an independent random stream.
    pub fn derive(&mut self, budget: Option<u64>) -> Self {
        self.children += 1;
        let stream = splitmix64(self.stream ^ splitmix64(self.children));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        StochasticOracle {
            problem: Arc::clone(&self.problem),
            noise: self.noise.clone(),
            rng,
            seed: self.seed,
            stream,
            children: 0,
            calls_used: 0,
            budget_cap: budget,
        }
    }

    /// A raw random stream derived by the same child rule, for non-query
    /// randomness (e.g. trajectory sampling). Costs no oracle calls.
    pub fn derive_rng(&mut self) -> ChaCha8Rng {
        self.children += 1;
        let stream = splitmix64(self.stream ^ splitmix64(self.children));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Folds a finished child's spend back into this oracle's ledger.
    pub fn absorb(&mut self, child: &StochasticOracle) {
        self.calls_used += child.calls_used;
    }

    /// Records externally-accounted calls (used when merging parallel work).
    pub fn record_calls(&mut self, calls: u64) {
        self.calls_used += calls;
    }

    pub fn calls_used(&self) -> u64 {
        self.calls_used
    }

    pub fn budget_cap(&self) -> Option<u64> {
        self.budget_cap
    }

    /// Remaining budget; `u64::MAX` when unlimited.
    pub fn remaining(&self) -> u64 {
        match self.budget_cap {
            Some(cap) => cap.saturating_sub(self.calls_used),
            None => u64::MAX,
        }
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise.is_noiseless()
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn validate(&self, x: &[f64]) -> Result<(), OracleError> {
        if x.len() != self.problem.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: self.problem.dim(),
                got: x.len(),
            });
        }
        if !vector::all_finite(x) {
            return Err(OracleError::NonFiniteInput);
        }
        Ok(())
    }

    fn charge(&mut self) -> Result<(), OracleError> {
        if let Some(cap) = self.budget_cap {
            if self.calls_used >= cap {
                return Err(OracleError::BudgetExhausted {
                    used: self.calls_used,
                    cap,
                });
            }
        }
        self.calls_used += 1;
        Ok(())
    }

    /// Noisy gradient: exact gradient plus a mean-zero perturbation of norm
    /// at most `delta(x)`. The perturbation is a uniform sphere direction
    /// scaled by a uniform radius fraction, with an antithetic sign flip so
    /// the mean is exactly zero.
    pub fn query_gradient(&mut self, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.validate(x)?;
        self.charge()?;
        let mut g = self.problem.gradient(x);
        let delta = self.noise.gradient.bound_at(x);
        if delta > 0.0 {
            let dir = self.sphere_direction(g.len());
            let r: f64 = self.rng.random::<f64>();
            let sign = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
            vector::axpy_mut(&mut g, sign * r * delta, &dir);
        }
        Ok(g)
    }

    /// Noisy value: exact value plus mean-zero noise uniform on
    /// `[-s(x), +s(x)]`.
    pub fn query_value(&mut self, x: &[f64]) -> Result<f64, OracleError> {
        self.validate(x)?;
        if self.noise.value.needs_ground_truth() && self.problem.truth().is_none() {
            return Err(OracleError::MissingGroundTruth);
        }
        self.charge()?;
        let v = self.problem.objective(x);
        let gap = match self.problem.truth() {
            Some(t) => v - t.l_star,
            None => 0.0,
        };
        let s = self.noise.value.halfwidth(gap);
        if s > 0.0 {
            let u: f64 = self.rng.random::<f64>();
            Ok(v + (2.0 * u - 1.0) * s)
        } else {
            Ok(v)
        }
    }

    fn sphere_direction(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| standard_normal(&mut self.rng)).collect();
            let n = vector::norm(&v);
            if n > 1e-300 {
                return vector::scale(&v, 1.0 / n);
            }
        }
    }
}

/// SplitMix64 finalizer, used for child-stream derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::super::noise::{GradientNoise, ValueNoise};
    use super::*;

    fn half_norm_sq() -> Arc<Problem> {
        Arc::new(Problem::quadratic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap())
    }

    #[test]
    fn noiseless_gradient_is_exact() {
        let mut o = StochasticOracle::new(half_norm_sq(), NoiseModel::noiseless(), 1, None);
        assert_eq!(o.query_gradient(&[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(o.query_value(&[2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(o.calls_used(), 2);
    }

    #[test]
    fn gradient_at_optimum_with_zero_noise_is_zero() {
        let mut o = StochasticOracle::new(half_norm_sq(), NoiseModel::noiseless(), 1, None);
        assert_eq!(o.query_gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gap_scaled_noise_vanishes_at_optimum() {
        let noise = NoiseModel {
            gradient: GradientNoise::None,
            value: ValueNoise::GapScaled {
                v0: 0.0,
                v1: 1.0,
                cap: 10.0,
            },
        };
        let mut o = StochasticOracle::new(half_norm_sq(), noise, 3, None);
        for _ in 0..100 {
            assert_eq!(o.query_value(&[0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_noise_at_the_optimum_gives_the_zero_vector() {
        // noise bound vanishing at the optimum: queries there are exact
        let noise = NoiseModel {
            gradient: GradientNoise::LinearRadial {
                center: vec![0.0, 0.0],
                base: 0.0,
                slope: 0.2,
                cap: 5.0,
            },
            value: ValueNoise::None,
        };
        let mut o = StochasticOracle::new(half_norm_sq(), noise, 9, None);
        for _ in 0..20 {
            assert_eq!(o.query_gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn gap_scaled_noise_requires_ground_truth() {
        let opaque = Arc::new(Problem::from_fns(
            "opaque",
            1,
            |x| x[0] * x[0],
            |x| vec![2.0 * x[0]],
        ));
        let noise = NoiseModel {
            gradient: GradientNoise::None,
            value: ValueNoise::GapScaled {
                v0: 0.1,
                v1: 1.0,
                cap: 1.0,
            },
        };
        let mut o = StochasticOracle::new(opaque, noise, 1, Some(5));
        assert!(matches!(
            o.query_value(&[1.0]),
            Err(OracleError::MissingGroundTruth)
        ));
        assert_eq!(o.calls_used(), 0);
    }

    #[test]
    fn budget_is_enforced_and_exact() {
        let mut o = StochasticOracle::new(half_norm_sq(), NoiseModel::noiseless(), 1, Some(3));
        for _ in 0..3 {
            o.query_gradient(&[1.0, 1.0]).unwrap();
        }
        let err = o.query_value(&[1.0, 1.0]).unwrap_err();
        assert_eq!(err, OracleError::BudgetExhausted { used: 3, cap: 3 });
        assert_eq!(o.calls_used(), 3);
    }

    #[test]
    fn dimension_and_finiteness_are_validated_without_charging() {
        let mut o = StochasticOracle::new(half_norm_sq(), NoiseModel::noiseless(), 1, Some(10));
        assert!(matches!(
            o.query_gradient(&[1.0]),
            Err(OracleError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            o.query_value(&[f64::NAN, 0.0]),
            Err(OracleError::NonFiniteInput)
        ));
        assert_eq!(o.calls_used(), 0);
    }

    #[test]
    fn same_seed_same_stream_is_bit_identical() {
        let noise = NoiseModel::constant(0.5, 0.25);
        let p = half_norm_sq();
        let mut a = StochasticOracle::new(Arc::clone(&p), noise.clone(), 42, None);
        let mut b = StochasticOracle::new(p, noise, 42, None);
        for i in 0..50 {
            let x = [i as f64 * 0.1, -(i as f64)];
            assert_eq!(a.query_gradient(&x).unwrap(), b.query_gradient(&x).unwrap());
            assert_eq!(
                a.query_value(&x).unwrap().to_bits(),
                b.query_value(&x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn derived_children_are_independent_of_parent_consumption() {
        let noise = NoiseModel::constant(0.5, 0.0);
        let p = half_norm_sq();
        let mut a = StochasticOracle::new(Arc::clone(&p), noise.clone(), 7, None);
        let mut b = StochasticOracle::new(p, noise, 7, None);
        // consume from `a` only; first children must still agree
        for _ in 0..10 {
            a.query_gradient(&[1.0, 2.0]).unwrap();
        }
        let mut ca = a.derive(Some(100));
        let mut cb = b.derive(Some(100));
        for _ in 0..20 {
            assert_eq!(
                ca.query_gradient(&[3.0, 4.0]).unwrap(),
                cb.query_gradient(&[3.0, 4.0]).unwrap()
            );
        }
        // same-rank children agree across parents, siblings differ
        let mut ca2 = a.derive(Some(100));
        let mut cb2 = b.derive(Some(100));
        let ga2 = ca2.query_gradient(&[3.0, 4.0]).unwrap();
        assert_eq!(ga2, cb2.query_gradient(&[3.0, 4.0]).unwrap());
        let mut cb1_replay =
            StochasticOracle::new(half_norm_sq(), NoiseModel::constant(0.5, 0.0), 7, None)
                .derive(Some(100));
        assert_ne!(ga2, cb1_replay.query_gradient(&[3.0, 4.0]).unwrap());
    }

    #[test]
    fn absorb_accumulates_child_spend() {
        let p = half_norm_sq();
        let mut o = StochasticOracle::new(p, NoiseModel::noiseless(), 1, Some(100));
        let mut c = o.derive(Some(10));
        for _ in 0..10 {
            c.query_gradient(&[1.0, 1.0]).unwrap();
        }
        o.absorb(&c);
        assert_eq!(o.calls_used(), 10);
    }
}
