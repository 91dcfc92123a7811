//! Bounded-noise models for gradient and value oracles.
//!
//! Gradient queries return the exact gradient plus a mean-zero perturbation
//! whose norm never exceeds a pointwise bound `delta(x)`; value queries add
//! mean-zero noise bounded by a constant half-width, optionally tightened by
//! a gap-dependent variance law that vanishes at the optimum.

use std::sync::Arc;

use super::oracle::OracleError;
use crate::vector;

type BoundFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Pointwise gradient-noise bound `delta(x)` plus its global cap.
#[derive(Clone)]
pub enum GradientNoise {
    None,
    /// `delta(x) = bound` everywhere.
    Constant {
        bound: f64,
    },
    /// `delta(x) = base + slope * ||x - center||`, capped at `cap`.
    LinearRadial {
        center: Vec<f64>,
        base: f64,
        slope: f64,
        cap: f64,
    },
    /// Arbitrary pointwise bound; no closed-form radial maximum.
    Custom {
        bound_at: BoundFn,
        cap: f64,
    },
}

impl std::fmt::Debug for GradientNoise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradientNoise::None => write!(f, "None"),
            GradientNoise::Constant { bound } => write!(f, "Constant({bound})"),
            GradientNoise::LinearRadial {
                base, slope, cap, ..
            } => {
                write!(f, "LinearRadial(base={base}, slope={slope}, cap={cap})")
            }
            GradientNoise::Custom { cap, .. } => write!(f, "Custom(cap={cap})"),
        }
    }
}

impl GradientNoise {
    /// Pointwise bound `delta(x)`.
    pub fn bound_at(&self, x: &[f64]) -> f64 {
        match self {
            GradientNoise::None => 0.0,
            GradientNoise::Constant { bound } => *bound,
            GradientNoise::LinearRadial {
                center,
                base,
                slope,
                cap,
            } => (base + slope * vector::dist(x, center)).min(*cap),
            GradientNoise::Custom { bound_at, cap } => bound_at(x).min(*cap),
        }
    }

    /// Global cap `delta_max` over all of space.
    pub fn cap(&self) -> f64 {
        match self {
            GradientNoise::None => 0.0,
            GradientNoise::Constant { bound } => *bound,
            GradientNoise::LinearRadial { cap, .. } | GradientNoise::Custom { cap, .. } => *cap,
        }
    }
}

/// Value-noise half-width model.
#[derive(Clone, Debug)]
pub enum ValueNoise {
    None,
    /// Noise uniform on `[-bound, +bound]`.
    Uniform {
        bound: f64,
    },
    /// Noise uniform on `[-s(x), +s(x)]` with
    /// `s(x) = min(cap, sqrt(3 (v0 + v1 * (l(x) - l*))))`, so the variance
    /// obeys `VAR <= v0 + v1 * gap` exactly and vanishes at the optimum
    /// when `v0 = 0`. Requires ground truth on the problem.
    GapScaled {
        v0: f64,
        v1: f64,
        cap: f64,
    },
}

impl ValueNoise {
    /// Global half-width cap `sigma_max`.
    pub fn cap(&self) -> f64 {
        match self {
            ValueNoise::None => 0.0,
            ValueNoise::Uniform { bound } => *bound,
            ValueNoise::GapScaled { cap, .. } => *cap,
        }
    }

    /// Half-width at a point with suboptimality `gap` (ignored unless
    /// gap-scaled).
    pub fn halfwidth(&self, gap: f64) -> f64 {
        match self {
            ValueNoise::None => 0.0,
            ValueNoise::Uniform { bound } => *bound,
            ValueNoise::GapScaled { v0, v1, cap } => {
                (3.0 * (v0 + v1 * gap.max(0.0))).sqrt().min(*cap)
            }
        }
    }

    pub fn needs_ground_truth(&self) -> bool {
        matches!(self, ValueNoise::GapScaled { .. })
    }
}

/// Gradient-noise bound plus value-noise model for one oracle.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub gradient: GradientNoise,
    pub value: ValueNoise,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            gradient: GradientNoise::None,
            value: ValueNoise::None,
        }
    }

    /// Constant gradient bound and uniform value noise.
    pub fn constant(gradient_bound: f64, value_bound: f64) -> Self {
        NoiseModel {
            gradient: if gradient_bound == 0.0 {
                GradientNoise::None
            } else {
                GradientNoise::Constant {
                    bound: gradient_bound,
                }
            },
            value: if value_bound == 0.0 {
                ValueNoise::None
            } else {
                ValueNoise::Uniform { bound: value_bound }
            },
        }
    }

    /// Half-width of the value noise at the optimum.
    pub fn optimum_value_noise(&self) -> f64 {
        match &self.value {
            ValueNoise::None => 0.0,
            ValueNoise::Uniform { bound } => *bound,
            ValueNoise::GapScaled { v0, cap, .. } => (3.0 * v0).sqrt().min(*cap),
        }
    }

    pub fn is_noiseless(&self) -> bool {
        let g = match &self.gradient {
            GradientNoise::None => true,
            GradientNoise::Constant { bound } => *bound == 0.0,
            GradientNoise::LinearRadial {
                base, slope, cap, ..
            } => *cap == 0.0 || (*base == 0.0 && *slope == 0.0),
            GradientNoise::Custom { cap, .. } => *cap == 0.0,
        };
        let v = match &self.value {
            ValueNoise::None => true,
            ValueNoise::Uniform { bound } => *bound == 0.0,
            ValueNoise::GapScaled { v0, v1, cap } => *cap == 0.0 || (*v0 == 0.0 && *v1 == 0.0),
        };
        g && v
    }
}

/// Maximum gradient-noise bound over the ball `||x - center|| <= d`.
///
/// Exact for the closed-form radial profiles; custom profiles have no
/// closed-form maximum and are rejected.
pub fn max_noise_bound(noise: &NoiseModel, center: &[f64], d: f64) -> Result<f64, OracleError> {
    assert!(d >= 0.0, "domain radius must be nonnegative");
    match &noise.gradient {
        GradientNoise::None => Ok(0.0),
        GradientNoise::Constant { bound } => Ok(*bound),
        GradientNoise::LinearRadial {
            center: pc,
            base,
            slope,
            cap,
        } => {
            // max over the ball of base + slope ||x - pc|| is attained on the
            // boundary farthest from the profile center.
            Ok((base + slope * (vector::dist(center, pc) + d)).min(*cap))
        }
        GradientNoise::Custom { .. } => Err(OracleError::UnsupportedProfile),
    }
}
