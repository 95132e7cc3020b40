//! Numerical checks of the sign characterisations.
//!
//! Localized and expected criteria are statements about small steps, so each
//! check runs the update on a halving schedule of step scales and reports the
//! sign the differences settle on. A sign is only claimed when the last
//! three steps agree and each value clears ten times its error estimate.

mod bounds;
mod figure;
mod lemma;
mod qsd;

pub use bounds::{alpha_bounds, pseudo_truth, AlphaBoundsTable, AlphaRow, CevRow};
pub use figure::{
    corrected_ball, figure1_data, figure1_panels, impropriety_demo, update_raises_density_on_ball,
    Figure1Row, ImproprietyCase, ImproprietyRow, ImproprietyStatus, Panel,
};
pub use lemma::{lemma1, Lemma1Report, TestFunction};
pub use qsd::{check_qsd, qsd_factor2_monte_carlo, qsd_factors, QsdFactors, QsdReport};

use serde::{Deserialize, Serialize};

use crate::density::{DensityAt, ParamDensity};
use crate::divergence::{delta_ekl, localized_deltas};
use crate::error::{Error, Result};
use crate::quad::QuadSpec;
use crate::rules::{Equivalence, RuleKind, UpdateRule};
use crate::sign::Sign;
use crate::{BOUNDARY_BAND, SIGN_EPS};

/// Number of trailing schedule steps that must agree.
pub const STABLE_STEPS: usize = 3;
/// Required ratio of `|Δ|` to its error estimate on those steps.
pub const STABLE_MARGIN: f64 = 10.0;

/// How the ball radius follows the step scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum RadiusMap {
    /// `δ = scale^exponent`.
    Power {
        exponent: f64,
    },
    Constant {
        radius: f64,
    },
}

impl Default for RadiusMap {
    fn default() -> Self {
        RadiusMap::Power { exponent: 2.0 }
    }
}

impl RadiusMap {
    pub fn radius(&self, scale: f64) -> f64 {
        match *self {
            RadiusMap::Power { exponent } => scale.powf(exponent),
            RadiusMap::Constant { radius } => radius,
        }
    }
}

/// Step scales `start·2^-k` for `k = 0..=halvings`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub start: f64,
    pub halvings: u32,
    pub radius: RadiusMap,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            start: 0.1,
            halvings: 12,
            radius: RadiusMap::default(),
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0 && self.start.is_finite()) {
            return Err(Error::invalid(format!(
                "schedule start {} must be positive",
                self.start
            )));
        }
        if self.halvings < 6 {
            return Err(Error::invalid(format!(
                "schedule needs at least 6 halvings, got {}",
                self.halvings
            )));
        }
        match self.radius {
            RadiusMap::Power { exponent } if exponent.is_nan() || exponent <= 0.0 => {
                Err(Error::invalid("radius exponent must be positive"))
            }
            RadiusMap::Constant { radius } if radius.is_nan() || radius <= 0.0 => {
                Err(Error::invalid("radius must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn scales(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.halvings).map(move |k| self.start * 0.5f64.powi(k as i32))
    }
}

/// Inputs of one localized or expected check.
///
/// The model density is the one the rule is bound to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub truth: DensityAt,
    /// Truth of the next period, used in place of `truth` by the localized
    /// checks when present.
    pub forward_truth: Option<DensityAt>,
    pub theta_pred: f64,
    pub y_t: f64,
    pub rule: UpdateRule,
    pub schedule: Schedule,
    pub quad: QuadSpec,
}

impl Scenario {
    pub fn model(&self) -> &ParamDensity {
        &self.rule.model
    }

    /// The density the localized criteria compare against.
    pub fn localized_truth(&self) -> &DensityAt {
        self.forward_truth.as_ref().unwrap_or(&self.truth)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.quad.validate()?;
        self.model().check_theta(self.theta_pred)?;
        self.model().check_outcome(self.y_t)?;
        let w = self
            .localized_truth()
            .truncation_bounds(self.quad.tail_mass)?;
        if !w.contains(self.y_t) {
            return Err(Error::invalid(format!(
                "y_t = {} lies outside the truth's window [{}, {}]",
                self.y_t, w.lo, w.hi
            )));
        }
        Ok(())
    }

    fn densities_at_y(&self) -> (f64, f64) {
        (
            self.localized_truth().pdf(self.y_t),
            self.model().pdf(self.y_t, self.theta_pred),
        )
    }
}

/// One schedule step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// `α_k` or `κ_k`.
    pub scale: f64,
    /// Ball radius `δ_k`; absent for expected criteria.
    pub radius: Option<f64>,
    pub delta: f64,
    pub err: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Agreed,
    Disagreed,
    Inconclusive,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub steps: Vec<Step>,
    pub stabilized: Option<Sign>,
    pub predicted: Sign,
    pub agrees: bool,
    /// The scenario sits inside the sign-resolution band; no sign is claimed.
    pub boundary: bool,
}

impl SignReport {
    fn new(steps: Vec<Step>, predicted: Sign, boundary: bool) -> SignReport {
        let stabilized = stabilized_sign(&steps);
        SignReport {
            agrees: !boundary && stabilized == Some(predicted),
            steps,
            stabilized,
            predicted,
            boundary,
        }
    }

    pub fn outcome(&self) -> Outcome {
        if self.boundary {
            Outcome::Boundary
        } else if self.stabilized.is_none() {
            Outcome::Inconclusive
        } else if self.agrees {
            Outcome::Agreed
        } else {
            Outcome::Disagreed
        }
    }

    pub fn last(&self) -> Option<&Step> {
        self.steps.last()
    }

    /// Least-squares slope of `log|Δ|` against `log scale` over the steps
    /// with a nonzero difference.
    pub fn log_log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .steps
            .iter()
            .filter(|s| s.delta != 0.0)
            .map(|s| (s.scale.ln(), s.delta.abs().ln()))
            .collect();
        least_squares_slope(&pts)
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn stabilized_sign(steps: &[Step]) -> Option<Sign> {
    if steps.len() < STABLE_STEPS {
        return None;
    }
    let tail = &steps[steps.len() - STABLE_STEPS..];
    let s = tail[0].sign;
    let resolved = tail
        .iter()
        .all(|t| t.sign == s && t.delta.abs() > STABLE_MARGIN * t.err);
    (s != Sign::Zero && resolved).then_some(s)
}

fn step(scale: f64, radius: Option<f64>, delta: f64, err: f64) -> Step {
    Step {
        scale,
        radius,
        delta,
        err,
        sign: Sign::of(delta),
    }
}

fn localized_schedule(
    s: &Scenario,
    rule_at: impl Fn(f64) -> Result<UpdateRule>,
) -> Result<Vec<Step>> {
    let truth = s.localized_truth();
    s.schedule
        .scales()
        .map(|k| {
            let r = s.schedule.radius.radius(k);
            let d = localized_deltas(&rule_at(k)?, s.y_t, s.theta_pred, truth, r, &s.quad)?;
            Ok(step(k, Some(r), d.delta_ckl, d.err_ckl))
        })
        .collect()
}

/// Censored-divergence sign of a score-driven step: negative exactly when
/// the truth is denser than the prediction at the observation.
///
/// The schedule supplies the learning rates; the rule's own rate is replaced.
pub fn check_theorem1(s: &Scenario) -> Result<SignReport> {
    s.validate()?;
    let RuleKind::ScoreDriven { scale, .. } = s.rule.kind else {
        return Err(Error::invalid(format!(
            "this check needs a score-driven rule, got {}",
            s.rule.kind.id()
        )));
    };
    let (p, f) = s.densities_at_y();
    let score = s.model().score(s.y_t, s.theta_pred);
    let boundary = (p - f).abs() < BOUNDARY_BAND || score == 0.0;
    let predicted = Sign::of(f - p);
    let steps = localized_schedule(s, |alpha| {
        UpdateRule::new(RuleKind::ScoreDriven { alpha, scale }, s.rule.model)
    })?;
    Ok(SignReport::new(steps, predicted, boundary))
}

/// Censored-divergence sign of an arbitrary deterministic rule, from the
/// signs of the score, the step, and `p − f` at the observation.
pub fn check_theorem3(s: &Scenario) -> Result<SignReport> {
    s.validate()?;
    let step0 = s.rule.single_delta(s.y_t, s.theta_pred)?;
    let (p, f) = s.densities_at_y();
    let score = s.model().score(s.y_t, s.theta_pred);
    let product = score * step0 * (p - f);
    let boundary = (p - f).abs() < BOUNDARY_BAND || score == 0.0 || step0 == 0.0;
    let predicted = Sign::of(product).flip();
    let steps = localized_schedule(s, |kappa| s.rule.downscaled(kappa))?;
    Ok(SignReport::new(steps, predicted, boundary))
}

/// Expected-divergence sign of the downscaled rule for small scales:
/// negative exactly when the rule is score equivalent in expectation.
pub fn check_theorem2(s: &Scenario) -> Result<SignReport> {
    s.schedule.validate()?;
    s.quad.validate()?;
    s.model().check_theta(s.theta_pred)?;
    let m = s.rule.moments(s.theta_pred, &s.truth, &s.quad)?;
    let (predicted, boundary) = match crate::rules::equivalence_of_product(m.e_delta * m.e_score) {
        Equivalence::Yes => (Sign::Negative, false),
        Equivalence::No => (Sign::Positive, false),
        Equivalence::Zero => (Sign::Zero, true),
    };
    let boundary = boundary || m.e_delta.abs() < SIGN_EPS || m.e_score.abs() < SIGN_EPS;
    let steps = ekl_schedule(s, &s.rule)?;
    Ok(SignReport::new(steps, predicted, boundary))
}

fn ekl_schedule(s: &Scenario, rule: &UpdateRule) -> Result<Vec<Step>> {
    s.schedule
        .scales()
        .map(|kappa| {
            let r = delta_ekl(&s.truth, &rule.downscaled(kappa)?, s.theta_pred, &s.quad)?;
            Ok(step(kappa, None, r.value, r.err_estimate))
        })
        .collect()
}
