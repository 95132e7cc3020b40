//! Run configuration: a JSON document listing checks and their scenarios.
//!
//! ```json
//! {
//!   "master_seed": 42,
//!   "jobs": 0,
//!   "out_dir": "sdkl-out",
//!   "quad": { "rel_tol": 1e-9 },
//!   "checks": [
//!     { "check": "theorem1",
//!       "grids": [{ "prefix": "loc",
//!                   "model": { "family": "gaussian_location" },
//!                   "rule": { "id": "sd", "alpha": 0.1 },
//!                   "truth": { "family": "gaussian_location" },
//!                   "lambdas": [-1.0, 1.5], "y": [1.0], "theta_pred": [0.0] }] }
//!   ]
//! }
//! ```

use std::collections::HashSet;
use std::path::PathBuf;

use serde::Deserialize;

use sdkl_core::lab::{Schedule, TestFunction};
use sdkl_core::{DensityAt, Interval, ParamDensity, QuadSpec, RuleKind};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub quad: QuadSpec,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Theorem1(LocalizedBlock),
    Theorem3(LocalizedBlock),
    Theorem2(ExpectedBlock),
    AlphaBounds { cases: Vec<AlphaBoundsCase> },
    Qsd { cases: Vec<QsdCase> },
    Lemma1 { cases: Vec<LemmaCase> },
    Figure1(FigureSpec),
    Impropriety(ImproprietyBlock),
}

impl CheckSpec {
    pub fn id(&self) -> &'static str {
        match self {
            CheckSpec::Theorem1(_) => "theorem1",
            CheckSpec::Theorem3(_) => "theorem3",
            CheckSpec::Theorem2(_) => "theorem2",
            CheckSpec::AlphaBounds { .. } => "alpha_bounds",
            CheckSpec::Qsd { .. } => "qsd",
            CheckSpec::Lemma1 { .. } => "lemma1",
            CheckSpec::Figure1(_) => "figure1",
            CheckSpec::Impropriety(_) => "impropriety",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub truth: DensityAt,
    #[serde(default)]
    pub forward_truth: Option<DensityAt>,
    pub model: ParamDensity,
    pub theta_pred: f64,
    #[serde(default)]
    pub y_t: f64,
    pub rule: RuleKind,
    #[serde(default)]
    pub schedule: Option<Schedule>,
}

/// Cartesian product of observations, predictions and truth parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub prefix: String,
    pub model: ParamDensity,
    pub rule: RuleKind,
    /// Truth family; the grid sets its parameter to each of `lambdas`.
    pub truth: ParamDensity,
    pub lambdas: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_pred: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizedBlock {
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub grids: Vec<GridSpec>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedBlock {
    #[serde(default = "expected_schedule")]
    pub schedule: Schedule,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

pub fn expected_schedule() -> Schedule {
    Schedule {
        halvings: 6,
        ..Schedule::default()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaBoundsCase {
    pub id: String,
    pub truth: DensityAt,
    pub model: ParamDensity,
    pub theta_pred: f64,
    /// Curvature bound; estimated on `theta_box × truth window` when absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub cev_alphas: Vec<f64>,
    pub theta_box: Interval,
    /// The bound is known to be attained, so the difference must turn
    /// positive just past it.
    #[serde(default)]
    pub tight: bool,
}

fn default_grid_n() -> usize {
    50
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsdCase {
    pub id: String,
    pub nu: f64,
    pub theta_pred: f64,
    pub truth: DensityAt,
    #[serde(default = "unit")]
    pub alpha: f64,
    #[serde(default = "expected_schedule")]
    pub schedule: Schedule,
    /// Monte Carlo draws for the cross-check of the second factor; 0 skips it.
    #[serde(default)]
    pub mc_draws: usize,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct LemmaCase {
    pub id: String,
    #[serde(flatten)]
    pub g: TestFunction,
    pub y_t: f64,
    pub radii: Vec<f64>,
    pub min_slope: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSpec {
    #[serde(default = "FigureSpec::default_alpha")]
    pub alpha: f64,
    #[serde(default = "FigureSpec::default_delta")]
    pub delta: f64,
    #[serde(default = "unit")]
    pub y_t: f64,
    #[serde(default)]
    pub theta_pred: f64,
}

impl FigureSpec {
    fn default_alpha() -> f64 {
        0.5
    }

    fn default_delta() -> f64 {
        0.01
    }
}

impl Default for FigureSpec {
    fn default() -> Self {
        FigureSpec {
            alpha: FigureSpec::default_alpha(),
            delta: FigureSpec::default_delta(),
            y_t: 1.0,
            theta_pred: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImproprietyBlock {
    pub prefix: String,
    pub model: ParamDensity,
    pub rule: RuleKind,
    pub radius: f64,
    pub y: Vec<f64>,
    pub theta_pred: Vec<f64>,
    /// Random Gaussian-location truths drawn per (y, θ) pair.
    #[serde(default)]
    pub random_truths: usize,
    /// Also include the truth equal to the predicted model.
    #[serde(default)]
    pub include_self: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.quad
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("duplicate scenario id {0:?}")]
    DuplicateId(String),
}

/// Rejects repeated ids; `ids` is the list produced by task expansion.
pub fn check_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<(), ConfigError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ConfigError::DuplicateId(id.to_owned()));
        }
    }
    Ok(())
}
