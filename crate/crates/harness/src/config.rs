//! Experiment configuration: a TOML document naming the problem, noise
//! model, algorithm with its user inputs, seeds, and output. Unknown keys
//! are errors.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use grasp_core::grasp::{DmaxOption, UserInputs};
use grasp_core::problems::{GradientNoise, NoiseModel, Problem, ValueNoise};

use crate::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub algorithm: AlgorithmConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `l(x) = 1/2 (x - x_star)' diag(eigenvalues) (x - x_star)`
    Quadratic {
        x_star: Vec<f64>,
        eigenvalues: Vec<f64>,
    },
    /// `l(x) = scale * ||x - x_star||^(1 + exponent)`
    HoelderPower {
        x_star: Vec<f64>,
        exponent: f64,
        scale: f64,
    },
    /// Ridge-regularized logistic regression on seeded synthetic data.
    LogisticSmall {
        dimension: usize,
        samples: usize,
        seed: u64,
        ridge: f64,
    },
    /// `l(x) = 1/2 ||x - center||^2 + amplitude * sum_j cos(frequency x_j)`
    SmoothNonconvex {
        center: Vec<f64>,
        amplitude: f64,
        frequency: f64,
    },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Arc<Problem>, HarnessError> {
        let p = match self {
            ProblemConfig::Quadratic {
                x_star,
                eigenvalues,
            } => Problem::quadratic(x_star.clone(), eigenvalues.clone())?,
            ProblemConfig::HoelderPower {
                x_star,
                exponent,
                scale,
            } => Problem::hoelder_power(x_star.clone(), *exponent, *scale)?,
            ProblemConfig::LogisticSmall {
                dimension,
                samples,
                seed,
                ridge,
            } => Problem::logistic_small(*dimension, *samples, *seed, *ridge)?,
            ProblemConfig::SmoothNonconvex {
                center,
                amplitude,
                frequency,
            } => Problem::smooth_nonconvex(center.clone(), *amplitude, *frequency)?,
        };
        Ok(Arc::new(p))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub gradient: GradientNoiseConfig,
    #[serde(default)]
    pub value: ValueNoiseConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GradientNoiseConfig {
    #[default]
    None,
    Constant {
        bound: f64,
    },
    LinearRadial {
        center: Vec<f64>,
        #[serde(default)]
        base: f64,
        slope: f64,
        cap: f64,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueNoiseConfig {
    #[default]
    None,
    Uniform {
        bound: f64,
    },
    GapScaled {
        v0: f64,
        v1: f64,
        cap: f64,
    },
}

impl NoiseConfig {
    pub fn build(&self) -> NoiseModel {
        let gradient = match &self.gradient {
            GradientNoiseConfig::None => GradientNoise::None,
            GradientNoiseConfig::Constant { bound } => GradientNoise::Constant { bound: *bound },
            GradientNoiseConfig::LinearRadial {
                center,
                base,
                slope,
                cap,
            } => GradientNoise::LinearRadial {
                center: center.clone(),
                base: *base,
                slope: *slope,
                cap: *cap,
            },
        };
        let value = match &self.value {
            ValueNoiseConfig::None => ValueNoise::None,
            ValueNoiseConfig::Uniform { bound } => ValueNoise::Uniform { bound: *bound },
            ValueNoiseConfig::GapScaled { v0, v1, cap } => ValueNoise::GapScaled {
                v0: *v0,
                v1: *v1,
                cap: *cap,
            },
        };
        NoiseModel { gradient, value }
    }

    /// One-line echo for reports.
    pub fn describe(&self) -> String {
        let g = match &self.gradient {
            GradientNoiseConfig::None => "none".to_string(),
            GradientNoiseConfig::Constant { bound } => format!("constant({bound})"),
            GradientNoiseConfig::LinearRadial {
                slope, base, cap, ..
            } => {
                format!("linear_radial(base={base},slope={slope},cap={cap})")
            }
        };
        let v = match &self.value {
            ValueNoiseConfig::None => "none".to_string(),
            ValueNoiseConfig::Uniform { bound } => format!("uniform({bound})"),
            ValueNoiseConfig::GapScaled { v0, v1, cap } => {
                format!("gap_scaled(v0={v0},v1={v1},cap={cap})")
            }
        };
        format!("g:{g}/v:{v}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    GraspDeterministic,
    GraspNc,
    GraspC,
    GraspCNolb,
}

impl std::fmt::Display for AlgorithmName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AlgorithmName::GraspDeterministic => "grasp_deterministic",
            AlgorithmName::GraspNc => "grasp_nc",
            AlgorithmName::GraspC => "grasp_c",
            AlgorithmName::GraspCNolb => "grasp_c_nolb",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgorithmName,
    pub budget: u64,
    pub confidence: f64,
    pub smoothness_floor: f64,
    pub gap_floor: f64,
    pub distance_floor: f64,
    #[serde(default)]
    pub value_lower_bound: Option<f64>,
    /// `gradient` or `value`; selects the search-bound rule of `grasp_c`.
    #[serde(default)]
    pub option: SearchBoundOption,
    #[serde(default)]
    pub initial_fraction: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchBoundOption {
    #[default]
    Gradient,
    Value,
}

impl AlgorithmConfig {
    pub fn user_inputs(&self) -> UserInputs {
        UserInputs {
            budget: self.budget,
            confidence: self.confidence,
            smoothness_floor: self.smoothness_floor,
            gap_floor: self.gap_floor,
            distance_floor: self.distance_floor,
            value_lower_bound: self.value_lower_bound,
            dmax_option: match self.option {
                SearchBoundOption::Gradient => DmaxOption::GradientBased,
                SearchBoundOption::Value => DmaxOption::ValueBased,
            },
            initial_fraction: self.initial_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub x0: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgo,
    /// Explicit step sizes / diameters; when absent, a 20-point geometric
    /// grid spanning a quarter of the derived lower bound to four times the
    /// derived upper bound is used.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineAlgo {
    Sgd,
    Unixgrad,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub budgets: Vec<u64>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_toml(&text)
    }

    pub fn parse_toml(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn problem_name(&self) -> &'static str {
        match self.problem {
            ProblemConfig::Quadratic { .. } => "quadratic",
            ProblemConfig::HoelderPower { .. } => "hoelder_power",
            ProblemConfig::LogisticSmall { .. } => "logistic_small",
            ProblemConfig::SmoothNonconvex { .. } => "smooth_nonconvex",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[problem]
kind = "smooth_nonconvex"
center = [2.0, 2.0]
amplitude = 0.1
frequency = 5.0

[noise]
gradient = { kind = "constant", bound = 0.1 }

[algorithm]
name = "grasp_nc"
budget = 10000
confidence = 0.05
smoothness_floor = 0.01
gap_floor = 0.01
distance_floor = 0.01

[run]
x0 = [0.0, 0.0]
seeds = [0, 1]
format = "csv"
"#;

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::parse_toml(SAMPLE).unwrap();
        assert_eq!(cfg.algorithm.name, AlgorithmName::GraspNc);
        assert_eq!(cfg.run.seeds, vec![0, 1]);
        assert_eq!(cfg.run.format, OutputFormat::Csv);
        assert!(cfg.problem.build().is_ok());
        assert!(!cfg.noise.build().is_noiseless());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("frequency = 5.0", "frequency = 5.0\nwobble = 3");
        let err = ExperimentConfig::parse_toml(&bad);
        assert!(err.is_err());
        let bad2 = SAMPLE.replace("[run]", "[run]\nturbo = true");
        assert!(ExperimentConfig::parse_toml(&bad2).is_err());
    }

    #[test]
    fn defaults_are_noiseless_json() {
        let minimal = r#"
[problem]
kind = "quadratic"
x_star = [0.0]
eigenvalues = [1.0]

[algorithm]
name = "grasp_deterministic"
budget = 1000
confidence = 0.1
smoothness_floor = 0.001
gap_floor = 0.001
distance_floor = 0.001

[run]
x0 = [1.0]
seeds = [0]
"#;
        let cfg = ExperimentConfig::parse_toml(minimal).unwrap();
        assert!(cfg.noise.build().is_noiseless());
        assert_eq!(cfg.run.format, OutputFormat::Json);
    }
}
