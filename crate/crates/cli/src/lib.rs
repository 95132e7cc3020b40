//! Batch runner for the sign-characterisation checks.
//!
//! A run reads a JSON [`config::RunConfig`], expands it into independent
//! scenarios, evaluates them on a thread pool and writes one CSV per check
//! plus `summary.json`. Output bytes depend only on the configuration and the
//! master seed, never on the thread count.

pub mod config;
pub mod figure;
pub mod output;
pub mod runner;

use std::path::PathBuf;

pub use config::{CheckSpec, ConfigError, FigureSpec, RunConfig};
pub use output::Summary;

/// Configuration used by `sdkl verify-all`.
pub const VERIFY_ALL_CONFIG: &str = include_str!("../configs/verify_all.json");

pub const DEFAULT_OUT_DIR: &str = "sdkl-out";

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub timings: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

/// Exit status for a completed run: 1 if any check disagreed away from the
/// boundary or failed outright.
pub fn exit_code(summary: &Summary) -> u8 {
    u8::from(summary.disagreed > 0 || summary.failed > 0)
}

/// Runs every check of `cfg` and writes the outputs.
pub fn execute(mut cfg: RunConfig, opts: &RunOptions) -> Result<Summary, RunError> {
    if let Some(s) = opts.seed {
        cfg.master_seed = s;
    }
    if let Some(j) = opts.jobs {
        cfg.jobs = j;
    }
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let tasks = runner::expand(&cfg)?;
    let result = runner::run_tasks(&tasks, cfg.jobs)?;
    let mut check_ids: Vec<&str> = Vec::new();
    for c in &cfg.checks {
        if !check_ids.contains(&c.id()) {
            check_ids.push(c.id());
        }
    }
    Ok(output::write_all(
        &out_dir,
        cfg.master_seed,
        &check_ids,
        &result.rows,
        &result.artifacts,
        opts.timings,
    )?)
}

/// Parses and runs a configuration document.
pub fn execute_str(text: &str, opts: &RunOptions) -> Result<Summary, RunError> {
    execute(RunConfig::parse(text)?, opts)
}

/// A configuration holding only the illustration.
pub fn figure_config(spec: FigureSpec) -> RunConfig {
    RunConfig {
        master_seed: 0,
        jobs: 0,
        out_dir: None,
        quad: Default::default(),
        checks: vec![CheckSpec::Figure1(spec)],
    }
}
