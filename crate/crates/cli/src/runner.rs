//! Expands a configuration into independent tasks and runs them.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use sdkl_core::lab::{
    self, check_qsd, check_theorem1, check_theorem2, check_theorem3, figure1_data, figure1_panels,
    impropriety_demo, lemma1, qsd_factor2_monte_carlo, ImproprietyCase, ImproprietyStatus,
    Scenario, Schedule, SignReport,
};
use sdkl_core::{DensityAt, Family, ParamDensity, QuadSpec, Sign, UpdateRule, BOUNDARY_BAND};

use crate::config::{
    check_unique, AlphaBoundsCase, CheckSpec, ConfigError, FigureSpec, LemmaCase, LocalizedBlock,
    QsdCase, RunConfig, ScenarioSpec,
};
use crate::figure::figure_files;

/// Margin a single value must clear over its error estimate to count as signed.
const RESOLVE_MARGIN: f64 = 10.0;

/// Per-scenario seed: the first eight bytes of `SHA-256(master_seed ‖ id)`.
pub fn scenario_seed(master_seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

#[derive(Debug, Clone)]
pub enum Job {
    Theorem1(Box<Scenario>),
    Theorem3(Box<Scenario>),
    Theorem2(Box<Scenario>),
    AlphaBounds(Box<AlphaBoundsCase>, QuadSpec),
    Qsd(Box<QsdCase>, QuadSpec),
    Lemma1(LemmaCase),
    Figure1(FigureSpec, QuadSpec),
    Impropriety(Box<ImproprietyCase>, QuadSpec),
}

#[derive(Debug, Clone)]
pub struct Task {
    pub check_id: &'static str,
    pub scenario_id: String,
    pub job: Job,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario_id: String,
    pub check_id: &'static str,
    pub predicted: Option<Sign>,
    pub stabilized: Option<Sign>,
    pub boundary: bool,
    pub agrees: bool,
    pub last_delta: Option<f64>,
    pub err_estimate: Option<f64>,
    pub runtime_ms: f64,
    pub failure: Option<String>,
}

impl Row {
    fn new(check_id: &'static str, scenario_id: String) -> Row {
        Row {
            scenario_id,
            check_id,
            predicted: None,
            stabilized: None,
            boundary: false,
            agrees: false,
            last_delta: None,
            err_estimate: None,
            runtime_ms: 0.0,
            failure: None,
        }
    }

    /// Sets prediction and observation; agreement follows unless on the boundary.
    fn signs(mut self, predicted: Sign, stabilized: Option<Sign>, boundary: bool) -> Row {
        self.predicted = Some(predicted);
        self.stabilized = stabilized;
        self.boundary = boundary;
        self.agrees = !boundary && stabilized == Some(predicted);
        self
    }

    fn values(mut self, delta: f64, err: Option<f64>) -> Row {
        self.last_delta = Some(delta);
        self.err_estimate = err;
        self
    }

    fn from_report(check_id: &'static str, id: String, r: &SignReport) -> Row {
        let mut row = Row::new(check_id, id).signs(r.predicted, r.stabilized, r.boundary);
        row.agrees = r.agrees;
        match r.last() {
            Some(s) => row.values(s.delta, Some(s.err)),
            None => row,
        }
    }

    pub fn outcome(&self) -> RowOutcome {
        if self.failure.is_some() {
            RowOutcome::Failed
        } else if self.boundary {
            RowOutcome::Boundary
        } else if self.stabilized.is_none() {
            RowOutcome::Inconclusive
        } else if self.agrees {
            RowOutcome::Agreed
        } else {
            RowOutcome::Disagreed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOutcome {
    Agreed,
    Disagreed,
    Inconclusive,
    Boundary,
    Failed,
}

/// A file produced by a task, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

fn resolved_sign(value: f64, err: f64) -> Option<Sign> {
    (value != 0.0 && value.abs() > RESOLVE_MARGIN * err).then(|| Sign::of(value))
}

fn scenario_from_spec(
    spec: &ScenarioSpec,
    schedule: Schedule,
    quad: QuadSpec,
) -> Result<Scenario, ConfigError> {
    let invalid = |e: sdkl_core::Error| ConfigError::Invalid(format!("scenario {}: {e}", spec.id));
    spec.truth
        .density
        .check_theta(spec.truth.theta)
        .map_err(invalid)?;
    if let Some(f) = &spec.forward_truth {
        f.density.check_theta(f.theta).map_err(invalid)?;
    }
    let rule = UpdateRule::new(spec.rule.clone(), spec.model).map_err(invalid)?;
    Ok(Scenario {
        id: spec.id.clone(),
        truth: spec.truth,
        forward_truth: spec.forward_truth,
        theta_pred: spec.theta_pred,
        y_t: spec.y_t,
        rule,
        schedule: spec.schedule.unwrap_or(schedule),
        quad,
    })
}

fn localized_specs(block: &LocalizedBlock) -> Result<Vec<ScenarioSpec>, ConfigError> {
    let mut out = Vec::new();
    for g in &block.grids {
        for &y in &g.y {
            for &th in &g.theta_pred {
                for &l in &g.lambdas {
                    out.push(ScenarioSpec {
                        id: format!("{}/y={y}/theta={th}/lambda={l}", g.prefix),
                        truth: DensityAt {
                            density: g.truth,
                            theta: l,
                        },
                        forward_truth: None,
                        model: g.model,
                        theta_pred: th,
                        y_t: y,
                        rule: g.rule.clone(),
                        schedule: None,
                    });
                }
            }
        }
    }
    out.extend(block.scenarios.iter().cloned());
    Ok(out)
}

fn random_truth(rng: &mut ChaCha8Rng, k: usize) -> DensityAt {
    let lambda = rng.random_range(-3.0..3.0);
    let density = if k % 3 == 2 {
        ParamDensity::new(Family::GaussianMixture2 {
            weight: rng.random_range(0.2..0.8),
            mean1: -rng.random_range(0.5..2.0),
            sd1: rng.random_range(0.5..1.5),
            mean2: rng.random_range(0.5..2.0),
            sd2: rng.random_range(0.5..1.5),
        })
    } else {
        ParamDensity::gaussian_location(rng.random_range(0.5..2.0))
    }
    .expect("sampled shapes are valid");
    DensityAt {
        density,
        theta: lambda,
    }
}

/// Expands every check block into tasks, in configuration order.
pub fn expand(cfg: &RunConfig) -> Result<Vec<Task>, ConfigError> {
    let quad = cfg.quad;
    let mut tasks = Vec::new();
    let with_seed = |id: &str| quad.with_seed(scenario_seed(cfg.master_seed, id));
    for check in &cfg.checks {
        let check_id = check.id();
        match check {
            CheckSpec::Theorem1(block) | CheckSpec::Theorem3(block) => {
                for spec in localized_specs(block)? {
                    let s = Box::new(scenario_from_spec(
                        &spec,
                        block.schedule,
                        with_seed(&spec.id),
                    )?);
                    let job = if check_id == "theorem1" {
                        Job::Theorem1(s)
                    } else {
                        Job::Theorem3(s)
                    };
                    tasks.push(Task {
                        check_id,
                        scenario_id: spec.id,
                        job,
                    });
                }
            }
            CheckSpec::Theorem2(block) => {
                for spec in &block.scenarios {
                    let s = scenario_from_spec(spec, block.schedule, with_seed(&spec.id))?;
                    tasks.push(Task {
                        check_id,
                        scenario_id: spec.id.clone(),
                        job: Job::Theorem2(Box::new(s)),
                    });
                }
            }
            CheckSpec::AlphaBounds { cases } => {
                for c in cases {
                    tasks.push(Task {
                        check_id,
                        scenario_id: c.id.clone(),
                        job: Job::AlphaBounds(Box::new(c.clone()), with_seed(&c.id)),
                    });
                }
            }
            CheckSpec::Qsd { cases } => {
                for c in cases {
                    tasks.push(Task {
                        check_id,
                        scenario_id: c.id.clone(),
                        job: Job::Qsd(Box::new(c.clone()), with_seed(&c.id)),
                    });
                }
            }
            CheckSpec::Lemma1 { cases } => {
                for c in cases {
                    tasks.push(Task {
                        check_id,
                        scenario_id: c.id.clone(),
                        job: Job::Lemma1(c.clone()),
                    });
                }
            }
            CheckSpec::Figure1(spec) => tasks.push(Task {
                check_id,
                scenario_id: "figure1".into(),
                job: Job::Figure1(spec.clone(), quad),
            }),
            CheckSpec::Impropriety(b) => {
                let rule = UpdateRule::new(b.rule.clone(), b.model)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                for &y in &b.y {
                    for &th in &b.theta_pred {
                        let base = format!("{}/y={y}/theta={th}", b.prefix);
                        let mut truths = Vec::new();
                        if b.include_self {
                            truths.push((
                                format!("{base}/self"),
                                DensityAt {
                                    density: b.model,
                                    theta: th,
                                },
                            ));
                        }
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(scenario_seed(cfg.master_seed, &base));
                        for k in 0..b.random_truths {
                            truths.push((format!("{base}/random{k}"), random_truth(&mut rng, k)));
                        }
                        for (id, truth) in truths {
                            let case = ImproprietyCase {
                                id: id.clone(),
                                truth,
                                rule: rule.clone(),
                                theta_pred: th,
                                y_t: y,
                                radius: b.radius,
                            };
                            tasks.push(Task {
                                check_id,
                                scenario_id: id,
                                job: Job::Impropriety(Box::new(case), quad),
                            });
                        }
                    }
                }
            }
        }
    }
    check_unique(tasks.iter().map(|t| t.scenario_id.as_str()))?;
    Ok(tasks)
}

fn alpha_rows(id: &str, c: &AlphaBoundsCase, quad: &QuadSpec) -> sdkl_core::Result<Vec<Row>> {
    const CHECK: &str = "alpha_bounds";
    let curvature = match c.c {
        Some(v) => v,
        None => {
            let w = c.truth.truncation_bounds(quad.tail_mass)?;
            c.model.hessian_bound(c.theta_box, w, 101)?
        }
    };
    let t = lab::alpha_bounds(
        &c.truth,
        &c.model,
        c.theta_pred,
        curvature,
        c.grid_n,
        &c.cev_alphas,
        c.theta_box,
        quad,
    )?;
    let bar = t.bounds.alpha_bar_ekl;
    let mut rows = Vec::new();

    // Largest grid value: negative and resolved means the whole grid is.
    let worst = t
        .grid
        .iter()
        .max_by(|a, b| a.delta_ekl.total_cmp(&b.delta_ekl))
        .expect("grid is non-empty");
    let all_resolved = t
        .grid
        .iter()
        .all(|r| resolved_sign(r.delta_ekl, r.err) == Some(Sign::Negative));
    let observed = if all_resolved {
        Some(Sign::Negative)
    } else {
        resolved_sign(worst.delta_ekl, worst.err).filter(|s| *s == Sign::Positive)
    };
    rows.push(
        Row::new(CHECK, format!("{id}/grid"))
            .signs(Sign::Negative, observed, false)
            .values(worst.delta_ekl, Some(worst.err)),
    );
    rows.push(
        Row::new(CHECK, format!("{id}/beyond"))
            .signs(
                Sign::Positive,
                resolved_sign(t.beyond.delta_ekl, t.beyond.err),
                !c.tight,
            )
            .values(t.beyond.delta_ekl, Some(t.beyond.err)),
    );
    let ordered = t.bounds.alpha_bar_ekl <= t.bounds.alpha_bar_cev;
    rows.push(
        Row::new(CHECK, format!("{id}/bound_order"))
            .signs(
                Sign::Positive,
                Some(if ordered {
                    Sign::Positive
                } else {
                    Sign::Negative
                }),
                false,
            )
            .values(t.bounds.alpha_bar_cev - t.bounds.alpha_bar_ekl, None),
    );
    for r in &t.cev {
        // Positive margin: the expected update lands closer to the pseudo-truth.
        let margin =
            (r.pseudo_truth - c.theta_pred).abs() - (r.pseudo_truth - r.expected_update).abs();
        let predicted = if r.alpha < t.bounds.alpha_bar_cev {
            Sign::Positive
        } else {
            Sign::Negative
        };
        rows.push(
            Row::new(CHECK, format!("{id}/cev/alpha={}", r.alpha))
                .signs(
                    predicted,
                    resolved_sign(margin, 1e-12),
                    !c.tight && r.alpha >= t.bounds.alpha_bar_cev,
                )
                .values(margin, None),
        );
        let ekl_pred = if r.alpha <= bar {
            Sign::Negative
        } else {
            Sign::Positive
        };
        rows.push(
            Row::new(CHECK, format!("{id}/ekl/alpha={}", r.alpha))
                .signs(
                    ekl_pred,
                    Some(Sign::of(r.delta_ekl)),
                    !c.tight && r.alpha > bar,
                )
                .values(r.delta_ekl, None),
        );
    }
    Ok(rows)
}

fn qsd_rows(id: &str, c: &QsdCase, quad: &QuadSpec) -> sdkl_core::Result<Vec<Row>> {
    const CHECK: &str = "qsd";
    let r = check_qsd(c.nu, c.theta_pred, &c.truth, c.alpha, c.schedule, quad)?;
    let mut rows = vec![Row::from_report(CHECK, id.to_owned(), &r.report)];
    if c.mc_draws > 0 {
        let (m, se) = qsd_factor2_monte_carlo(c.nu, c.theta_pred, &c.truth, c.mc_draws, quad.seed)?;
        let diff = m - r.factors.factor2;
        let observed = if diff.abs() <= 3.0 * se {
            Sign::Zero
        } else {
            Sign::of(diff)
        };
        rows.push(
            Row::new(CHECK, format!("{id}/mc_factor2"))
                .signs(Sign::Zero, Some(observed), false)
                .values(diff, Some(se)),
        );
    }
    Ok(rows)
}

fn figure_rows(spec: &FigureSpec, quad: &QuadSpec) -> sdkl_core::Result<(Vec<Row>, Vec<Artifact>)> {
    const CHECK: &str = "figure1";
    let panels = figure1_panels(spec.alpha, spec.y_t, spec.theta_pred)?;
    let lambdas: Vec<f64> = panels.iter().map(|p| p.lambda).collect();
    let table = figure1_data(
        spec.alpha,
        spec.y_t,
        spec.theta_pred,
        &lambdas,
        spec.delta,
        quad,
    )?;
    let mut rows = Vec::new();
    for (p, r) in panels.iter().zip(&table) {
        let gap = r.p_y - r.f_pred_y;
        rows.push(
            Row::new(CHECK, format!("panel_{}/ckl", p.label))
                .signs(
                    Sign::of(-gap),
                    resolved_sign(r.delta_ckl, r.err_ckl),
                    gap.abs() < BOUNDARY_BAND,
                )
                .values(r.delta_ckl, Some(r.err_ckl)),
        );
    }
    let a = &table[0];
    rows.push(
        Row::new(CHECK, "panel_a/tkl".into())
            .signs(Sign::Negative, resolved_sign(a.delta_tkl, a.err_tkl), false)
            .values(a.delta_tkl, Some(a.err_tkl)),
    );
    rows.push(
        Row::new(CHECK, "panel_a/kl".into())
            .signs(Sign::Positive, Some(Sign::of(a.delta_kl)), false)
            .values(a.delta_kl, Some(0.0)),
    );
    let files = figure_files(spec, &panels, &table, quad)?;
    Ok((rows, files))
}

fn run_job(task: &Task) -> sdkl_core::Result<(Vec<Row>, Vec<Artifact>)> {
    let id = task.scenario_id.clone();
    let c = task.check_id;
    let one = |r: SignReport| Ok((vec![Row::from_report(c, id.clone(), &r)], Vec::new()));
    match &task.job {
        Job::Theorem1(s) => one(check_theorem1(s)?),
        Job::Theorem3(s) => one(check_theorem3(s)?),
        Job::Theorem2(s) => one(check_theorem2(s)?),
        Job::AlphaBounds(case, q) => Ok((alpha_rows(&id, case, q)?, Vec::new())),
        Job::Qsd(case, q) => Ok((qsd_rows(&id, case, q)?, Vec::new())),
        Job::Lemma1(case) => {
            let r = lemma1(case.g, case.y_t, &case.radii)?;
            let row = Row::new(c, id.clone());
            let row = match r.slope {
                Some(s) => row
                    .signs(Sign::Positive, Some(Sign::of(s - case.min_slope)), false)
                    .values(s, None),
                None => row.signs(Sign::Positive, None, false),
            };
            Ok((vec![row], Vec::new()))
        }
        Job::Figure1(spec, q) => figure_rows(spec, q),
        Job::Impropriety(case, q) => {
            let r = impropriety_demo(std::slice::from_ref(case.as_ref()), q)?.remove(0);
            let row = Row::new(c, id.clone());
            let row = match (r.status, r.delta_tkl, r.err) {
                (ImproprietyStatus::Skipped(_), _, _) => row.signs(Sign::Negative, None, true),
                (_, Some(d), Some(e)) => row
                    .signs(Sign::Negative, resolved_sign(d, e), false)
                    .values(d, Some(e)),
                _ => row.signs(Sign::Negative, None, false),
            };
            Ok((vec![row], Vec::new()))
        }
    }
}

/// Result of running every task, in task order.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub artifacts: Vec<Artifact>,
}

fn run_one(task: &Task) -> (Vec<Row>, Vec<Artifact>) {
    let start = Instant::now();
    let result = run_job(task);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok((mut rows, files)) => {
            for r in &mut rows {
                r.runtime_ms = ms;
            }
            (rows, files)
        }
        Err(e) => {
            let mut row = Row::new(task.check_id, task.scenario_id.clone());
            row.failure = Some(e.to_string());
            row.runtime_ms = ms;
            (vec![row], Vec::new())
        }
    }
}

/// Runs tasks on `jobs` threads (0 for all cores); output order is task order.
pub fn run_tasks(tasks: &[Task], jobs: usize) -> anyhow::Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let parts: Vec<(Vec<Row>, Vec<Artifact>)> =
        pool.install(|| tasks.par_iter().map(run_one).collect());
    let mut out = RunOutput::default();
    for (rows, files) in parts {
        out.rows.extend(rows);
        out.artifacts.extend(files);
    }
    Ok(out)
}
