//! Synthetic objectives with exact ground truth, bounded-noise models, and
//! the budgeted stochastic oracle every optimizer consumes.
//!
//! A [`Problem`] carries closed-form objective/gradient closures plus an
//! optional [`GroundTruth`] block (optimum, regularity constants). The
//! ground truth exists for tests and harness-side metrics only; optimizers
//! reach a problem exclusively through [`StochasticOracle`], which never
//! exposes it.

mod noise;
mod oracle;

pub use noise::{max_noise_bound, GradientNoise, NoiseModel, ValueNoise};
pub use oracle::{OracleError, StochasticOracle};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),
}

/// Exact regularity data for a constructed problem. Test-side only.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// A global minimizer.
    pub x_star: Vec<f64>,
    /// Objective value at the minimizer.
    pub l_star: f64,
    /// Gradient Lipschitz constant; `INFINITY` when the gradient is not
    /// Lipschitz.
    pub smoothness: f64,
    /// Gradient Hölder constant and exponent `(L, nu)` with `nu` in [0, 1].
    pub hoelder: (f64, f64),
    /// Objective Lipschitz constant; `INFINITY` when unbounded.
    pub lipschitz: f64,
    pub convex: bool,
}

type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An objective with closed-form gradient. Immutable and cheaply cloneable,
/// so concurrent runs can share one instance.
#[derive(Clone)]
pub struct Problem {
    name: String,
    dim: usize,
    objective: ObjectiveFn,
    gradient: GradientFn,
    truth: Option<GroundTruth>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("truth", &self.truth)
            .finish()
    }
}

impl Problem {
    /// Builds a problem from raw closures with no ground-truth block.
    ///
    /// This is the "opaque handle" used to check that optimizers never read
    /// regularity fields: everything in [`crate::base`] and [`crate::grasp`]
    /// must run against a problem constructed this way.
    pub fn from_fns<F, G>(name: &str, dim: usize, objective: F, gradient: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Problem {
            name: name.to_string(),
            dim,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            truth: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    /// True suboptimality gap `l(x) - l(x*)`. Harness-side metric; requires
    /// ground truth.
    pub fn true_gap(&self, x: &[f64]) -> Option<f64> {
        self.truth.as_ref().map(|t| self.objective(x) - t.l_star)
    }

    /// Exact gradient norm at `x`.
    pub fn true_grad_norm(&self, x: &[f64]) -> f64 {
        vector::norm(&self.gradient(x))
    }

    /// Quadratic `l(x) = 1/2 (x - x*)' diag(eig) (x - x*)`.
    pub fn quadratic(x_star: Vec<f64>, eigenvalues: Vec<f64>) -> Result<Self, ProblemError> {
        if x_star.is_empty() || x_star.len() != eigenvalues.len() {
            return Err(ProblemError::InvalidParams(
                "quadratic: x_star and eigenvalues must be nonempty with equal length".into(),
            ));
        }
        if eigenvalues
            .iter()
            .any(|&e| e.is_nan() || e <= 0.0 || !e.is_finite())
        {
            return Err(ProblemError::InvalidParams(
                "quadratic: eigenvalues must be positive and finite".into(),
            ));
        }
        if !vector::all_finite(&x_star) {
            return Err(ProblemError::InvalidParams(
                "quadratic: x_star must be finite".into(),
            ));
        }
        let dim = x_star.len();
        let l_max = eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let xs = x_star.clone();
        let eig = eigenvalues.clone();
        let objective = move |x: &[f64]| -> f64 {
            x.iter()
                .zip(&xs)
                .zip(&eig)
                .map(|((xi, si), ei)| 0.5 * ei * (xi - si) * (xi - si))
                .sum()
        };
        let xs2 = x_star.clone();
        let eig2 = eigenvalues;
        let gradient = move |x: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(&xs2)
                .zip(&eig2)
                .map(|((xi, si), ei)| ei * (xi - si))
                .collect()
        };
        Ok(Problem {
            name: "quadratic".into(),
            dim,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            truth: Some(GroundTruth {
                x_star,
                l_star: 0.0,
                smoothness: l_max,
                hoelder: (l_max, 1.0),
                lipschitz: f64::INFINITY,
                convex: true,
            }),
        })
    }

    /// Power of the distance to the optimum, `l(x) = c * ||x - x*||^(1+nu)`.
    ///
    /// The gradient is Hölder continuous with exponent `nu` and constant
    /// `c (1+nu) 2^(1-nu)`; for `nu = 1` the objective is `2c`-smooth, for
    /// `nu = 0` it is `c`-Lipschitz.
    pub fn hoelder_power(
        x_star: Vec<f64>,
        exponent: f64,
        scale: f64,
    ) -> Result<Self, ProblemError> {
        if x_star.is_empty() || !vector::all_finite(&x_star) {
            return Err(ProblemError::InvalidParams(
                "hoelder_power: x_star must be nonempty and finite".into(),
            ));
        }
        if !(0.0..=1.0).contains(&exponent) {
            return Err(ProblemError::InvalidParams(
                "hoelder_power: exponent must lie in [0, 1]".into(),
            ));
        }
        if scale.is_nan() || scale <= 0.0 || !scale.is_finite() {
            return Err(ProblemError::InvalidParams(
                "hoelder_power: scale must be positive and finite".into(),
            ));
        }
        let dim = x_star.len();
        let nu = exponent;
        let xs = x_star.clone();
        let objective = move |x: &[f64]| -> f64 { scale * vector::dist(x, &xs).powf(1.0 + nu) };
        let xs2 = x_star.clone();
        let gradient = move |x: &[f64]| -> Vec<f64> {
            let diff = vector::sub(x, &xs2);
            let r = vector::norm(&diff);
            if r == 0.0 {
                return vec![0.0; diff.len()];
            }
            // c (1+nu) r^(nu-1) (x - x*)
            vector::scale(&diff, scale * (1.0 + nu) * r.powf(nu - 1.0))
        };
        Ok(Problem {
            name: "hoelder_power".into(),
            dim,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            truth: Some(GroundTruth {
                x_star,
                l_star: 0.0,
                smoothness: if nu == 1.0 {
                    2.0 * scale
                } else {
                    f64::INFINITY
                },
                hoelder: (scale * (1.0 + nu) * (2.0f64).powf(1.0 - nu), nu),
                lipschitz: if nu == 0.0 { scale } else { f64::INFINITY },
                convex: true,
            }),
        })
    }

    /// Ridge-regularized logistic regression on a small seeded synthetic
    /// dataset. The optimum is computed once at construction by a Newton
    /// solve to relative gradient norm 1e-12, and the smoothness constant
    /// comes from the data Gram matrix bound plus the ridge term.
    pub fn logistic_small(
        dim: usize,
        samples: usize,
        seed: u64,
        ridge: f64,
    ) -> Result<Self, ProblemError> {
        if dim == 0 || samples == 0 {
            return Err(ProblemError::InvalidParams(
                "logistic_small: dim and samples must be positive".into(),
            ));
        }
        if ridge.is_nan() || ridge <= 0.0 || !ridge.is_finite() {
            return Err(ProblemError::InvalidParams(
                "logistic_small: ridge must be positive (the optimum must be finite)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_true: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
        let mut features = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for _ in 0..samples {
            let a: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            let mut y = if vector::dot(&a, &w_true) >= 0.0 {
                1.0
            } else {
                -1.0
            };
            // 10% label flips keep the data non-separable.
            if rng.random::<f64>() < 0.1 {
                y = -y;
            }
            features.push(a);
            labels.push(y);
        }

        let n = samples as f64;
        // Hessian bound: 1/(4n) sum a a' + ridge I.
        let mut gram = vec![vec![0.0; dim]; dim];
        for a in &features {
            for i in 0..dim {
                for j in 0..dim {
                    gram[i][j] += a[i] * a[j] / (4.0 * n);
                }
            }
        }
        let l_max = sym_lambda_max(&gram) + ridge;

        let f = features.clone();
        let lab = labels.clone();
        let objective = move |x: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (a, &y) in f.iter().zip(&lab) {
                acc += softplus(-y * vector::dot(a, x));
            }
            acc / n + 0.5 * ridge * vector::norm_sq(x)
        };
        let f2 = features.clone();
        let lab2 = labels.clone();
        let gradient = move |x: &[f64]| -> Vec<f64> {
            let mut g = vector::scale(x, ridge);
            for (a, &y) in f2.iter().zip(&lab2) {
                let s = sigmoid(-y * vector::dot(a, x));
                vector::axpy_mut(&mut g, -y * s / n, a);
            }
            g
        };
        let objective: ObjectiveFn = Arc::new(objective);
        let gradient: GradientFn = Arc::new(gradient);

        let x_star = newton_logistic(&features, &labels, ridge, &gradient)?;
        let l_star = objective(&x_star);
        Ok(Problem {
            name: "logistic_small".into(),
            dim,
            objective,
            gradient,
            truth: Some(GroundTruth {
                x_star,
                l_star,
                smoothness: l_max,
                hoelder: (l_max, 1.0),
                lipschitz: f64::INFINITY,
                convex: true,
            }),
        })
    }

    /// Separable smooth non-convex objective
    /// `l(x) = 1/2 ||x - a||^2 + eps * sum_j cos(omega x_j)`,
    /// with smoothness constant `1 + eps * omega^2`. The global optimum is
    /// found per coordinate by a scan plus golden-section refinement.
    pub fn smooth_nonconvex(
        center: Vec<f64>,
        amplitude: f64,
        frequency: f64,
    ) -> Result<Self, ProblemError> {
        if center.is_empty() || !vector::all_finite(&center) {
            return Err(ProblemError::InvalidParams(
                "smooth_nonconvex: center must be nonempty and finite".into(),
            ));
        }
        if amplitude.is_nan() || amplitude < 0.0 || frequency.is_nan() || frequency <= 0.0 {
            return Err(ProblemError::InvalidParams(
                "smooth_nonconvex: amplitude must be >= 0 and frequency > 0".into(),
            ));
        }
        let dim = center.len();
        let (eps, omega) = (amplitude, frequency);
        // the phase omega*x overflows f64 around |x| ~ 1e308/omega; the trig
        // terms are bounded, so clamp them there instead of returning NaN
        let safe_cos = move |xi: f64| {
            let phase = omega * xi;
            if phase.is_finite() {
                phase.cos()
            } else {
                1.0
            }
        };
        let safe_sin = move |xi: f64| {
            let phase = omega * xi;
            if phase.is_finite() {
                phase.sin()
            } else {
                0.0
            }
        };
        let a = center.clone();
        let objective = move |x: &[f64]| -> f64 {
            x.iter()
                .zip(&a)
                .map(|(xi, ai)| 0.5 * (xi - ai) * (xi - ai) + eps * safe_cos(*xi))
                .sum()
        };
        let a2 = center.clone();
        let gradient = move |x: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(&a2)
                .map(|(xi, ai)| (xi - ai) - eps * omega * safe_sin(*xi))
                .collect()
        };

        let mut x_star = Vec::with_capacity(dim);
        let mut l_star = 0.0;
        for &ai in &center {
            let (t, v) = coordinate_min(ai, eps, omega);
            x_star.push(t);
            l_star += v;
        }
        Ok(Problem {
            name: "smooth_nonconvex".into(),
            dim,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            truth: Some(GroundTruth {
                x_star,
                l_star,
                smoothness: 1.0 + eps * omega * omega,
                hoelder: (1.0 + eps * omega * omega, 1.0),
                lipschitz: f64::INFINITY,
                convex: eps == 0.0,
            }),
        })
    }
}

/// One standard normal draw via Box-Muller; consumes exactly two uniforms.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
fn sym_lambda_max(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let mut w = vec![0.0; d];
        for i in 0..d {
            w[i] = vector::dot(&m[i], &v);
        }
        let n = vector::norm(&w);
        if n == 0.0 {
            return 0.0;
        }
        lambda = n;
        v = vector::scale(&w, 1.0 / n);
    }
    lambda
}

/// Newton solve for the ridge-logistic optimum, to relative gradient norm
/// 1e-12. Backtracks on the gradient norm, which is enough for this smooth
/// strongly convex objective.
fn newton_logistic(
    features: &[Vec<f64>],
    labels: &[f64],
    ridge: f64,
    gradient: &GradientFn,
) -> Result<Vec<f64>, ProblemError> {
    let dim = features[0].len();
    let n = features.len() as f64;
    let mut x = vec![0.0; dim];
    let g0 = vector::norm(&gradient(&x));
    let tol = 1e-12 * g0.max(1.0);
    for _ in 0..200 {
        let g = gradient(&x);
        let gn = vector::norm(&g);
        if gn <= tol {
            return Ok(x);
        }
        let mut h = vec![vec![0.0; dim]; dim];
        for (a, &y) in features.iter().zip(labels) {
            let s = sigmoid(-y * vector::dot(a, &x));
            let w = s * (1.0 - s) / n;
            for i in 0..dim {
                for j in 0..dim {
                    h[i][j] += w * a[i] * a[j];
                }
            }
        }
        for (i, row) in h.iter_mut().enumerate() {
            row[i] += ridge;
        }
        let step = cholesky_solve(&mut h, &g).ok_or_else(|| {
            ProblemError::InvalidParams("logistic_small: Hessian not positive definite".into())
        })?;
        let mut t = 1.0;
        loop {
            let cand = vector::axpy(&x, -t, &step);
            if vector::norm(&gradient(&cand)) < gn || t < 1e-8 {
                x = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let gn = vector::norm(&gradient(&x));
    if gn <= tol {
        Ok(x)
    } else {
        Err(ProblemError::InvalidParams(format!(
            "logistic_small: Newton solve stalled at gradient norm {gn:.3e}"
        )))
    }
}

/// Solves `h y = b` for symmetric positive definite `h`, overwriting `h`
/// with its Cholesky factor.
fn cholesky_solve(h: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let d = h.len();
    for i in 0..d {
        for j in 0..=i {
            let mut s = h[i][j];
            for (hik, hjk) in h[i][..j].iter().zip(&h[j][..j]) {
                s -= hik * hjk;
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                h[i][i] = s.sqrt();
            } else {
                h[i][j] = s / h[j][j];
            }
        }
    }
    // forward then backward substitution
    let mut y = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            y[i] -= h[i][k] * y[k];
        }
        y[i] /= h[i][i];
    }
    for i in (0..d).rev() {
        for k in (i + 1)..d {
            y[i] -= h[k][i] * y[k];
        }
        y[i] /= h[i][i];
    }
    Some(y)
}

/// Global minimum of `h(t) = 1/2 (t - a)^2 + eps cos(omega t)`.
///
/// Any minimizer satisfies `|t - a| <= eps * omega`, so a scan over that
/// interval at a fraction of the cosine period brackets the global basin;
/// golden-section refinement finishes the job.
fn coordinate_min(a: f64, eps: f64, omega: f64) -> (f64, f64) {
    let h = |t: f64| 0.5 * (t - a) * (t - a) + eps * (omega * t).cos();
    if eps == 0.0 {
        return (a, 0.0);
    }
    let half = eps * omega + 1e-9;
    let period = std::f64::consts::TAU / omega;
    let steps = (((2.0 * half / period) * 64.0).ceil() as usize).clamp(4096, 1 << 20);
    let (mut best_t, mut best_v) = (a, h(a));
    for k in 0..=steps {
        let t = a - half + 2.0 * half * (k as f64) / (steps as f64);
        let v = h(t);
        if v < best_v {
            best_t = t;
            best_v = v;
        }
    }
    let dt = 2.0 * half / (steps as f64);
    let (mut lo, mut hi) = (best_t - dt, best_t + dt);
    let phi = 0.5 * (3.0 - (5.0f64).sqrt());
    let (mut t1, mut t2) = (lo + phi * (hi - lo), hi - phi * (hi - lo));
    let (mut v1, mut v2) = (h(t1), h(t2));
    for _ in 0..200 {
        if v1 < v2 {
            hi = t2;
            t2 = t1;
            v2 = v1;
            t1 = lo + phi * (hi - lo);
            v1 = h(t1);
        } else {
            lo = t1;
            t1 = t2;
            v1 = v2;
            t2 = hi - phi * (hi - lo);
            v2 = h(t2);
        }
    }
    let mut t = 0.5 * (lo + hi);
    // Newton polish on the derivative; value comparisons alone stall at
    // sqrt(machine epsilon) in t.
    let dh = |t: f64| (t - a) - eps * omega * (omega * t).sin();
    let d2h = |t: f64| 1.0 - eps * omega * omega * (omega * t).cos();
    for _ in 0..50 {
        let curv = d2h(t);
        if curv.abs() < 1e-6 {
            break;
        }
        let step = dh(t) / curv;
        let next = t - step.clamp(-dt, dt);
        if (next - t).abs() <= f64::EPSILON * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    (t, h(t))
}
