//! Updating rules `φ(y, θ) = θ + Δφ(y, θ)` and score-equivalence checks.
//!
//! A rule is either deterministic or a finite mixture of deterministic
//! branches; randomisation is never sampled, so every expectation over the
//! rule is an exact weighted sum.

use serde::{Deserialize, Serialize};

use crate::density::{DensityAt, ParamDensity};
use crate::error::{Error, Result};
use crate::quad::{self, QuadSpec};
use crate::sign::Sign;
use crate::SIGN_EPS;

/// Rule constructors, tagged by their configuration id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", deny_unknown_fields)]
pub enum RuleKind {
    /// `Δφ = α·S·∇`.
    #[serde(rename = "sd", alias = "scaled_sd")]
    ScoreDriven {
        alpha: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `Δφ_κ = κ·Δφ` branchwise.
    #[serde(rename = "downscaled")]
    Downscaled { base: Box<RuleKind>, kappa: f64 },
    /// `Δφ = α·∇̃` with the score of a different density.
    #[serde(rename = "qsd")]
    QuasiScoreDriven { alpha: f64, tilde: ParamDensity },
    /// `Δφ = −α·∇`.
    #[serde(rename = "anti")]
    AntiScore { alpha: f64 },
    /// `base` with probability `1 − q`, the identity with probability `q`.
    #[serde(rename = "lazy")]
    Lazy { base: Box<RuleKind>, q: f64 },
}

fn unit_scale() -> f64 {
    1.0
}

impl RuleKind {
    pub fn sd(alpha: f64) -> RuleKind {
        RuleKind::ScoreDriven { alpha, scale: 1.0 }
    }

    pub fn id(&self) -> &'static str {
        match self {
            RuleKind::ScoreDriven { scale, .. } if *scale != 1.0 => "scaled_sd",
            RuleKind::ScoreDriven { .. } => "sd",
            RuleKind::Downscaled { .. } => "downscaled",
            RuleKind::QuasiScoreDriven { .. } => "qsd",
            RuleKind::AntiScore { .. } => "anti",
            RuleKind::Lazy { .. } => "lazy",
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match self {
            RuleKind::ScoreDriven { alpha, scale } => {
                positive("alpha", *alpha)?;
                positive("scale", *scale)
            }
            RuleKind::Downscaled { base, kappa } => {
                positive("kappa", *kappa)?;
                base.validate()
            }
            RuleKind::QuasiScoreDriven { alpha, .. } | RuleKind::AntiScore { alpha } => {
                positive("alpha", *alpha)
            }
            RuleKind::Lazy { base, q } => {
                if !(*q >= 0.0 && *q < 1.0) {
                    return Err(Error::invalid(format!(
                        "freeze probability q = {q} not in [0, 1)"
                    )));
                }
                base.validate()
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        match self {
            RuleKind::Lazy { .. } => false,
            RuleKind::Downscaled { base, .. } => base.is_deterministic(),
            _ => true,
        }
    }

    fn push_branches(
        &self,
        model: &ParamDensity,
        y: f64,
        theta: f64,
        w: f64,
        k: f64,
        out: &mut Vec<Branch>,
    ) {
        match self {
            RuleKind::ScoreDriven { alpha, scale } => out.push(Branch {
                weight: w,
                delta: k * alpha * scale * model.score(y, theta),
            }),
            RuleKind::AntiScore { alpha } => out.push(Branch {
                weight: w,
                delta: -k * alpha * model.score(y, theta),
            }),
            RuleKind::QuasiScoreDriven { alpha, tilde } => out.push(Branch {
                weight: w,
                delta: k * alpha * tilde.score(y, theta),
            }),
            RuleKind::Downscaled { base, kappa } => {
                base.push_branches(model, y, theta, w, k * kappa, out)
            }
            RuleKind::Lazy { base, q } => {
                base.push_branches(model, y, theta, w * (1.0 - q), k, out);
                out.push(Branch {
                    weight: w * q,
                    delta: 0.0,
                });
            }
        }
    }

    fn check_tilde(&self, theta: f64) -> Result<()> {
        match self {
            RuleKind::QuasiScoreDriven { tilde, .. } => tilde.check_theta(theta),
            RuleKind::Downscaled { base, .. } | RuleKind::Lazy { base, .. } => {
                base.check_tilde(theta)
            }
            _ => Ok(()),
        }
    }
}

/// One deterministic branch of a rule: taken with probability `weight`,
/// it moves the parameter by `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub weight: f64,
    pub delta: f64,
}

/// Tri-state outcome of a score-equivalence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equivalence {
    Yes,
    No,
    /// Both sides vanish, or the product is inside the sign tolerance.
    Zero,
}

/// Moments of the update and of the model score under the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub e_delta: f64,
    pub e_delta_sq: f64,
    pub e_score: f64,
    pub var_score: f64,
}

/// An updating rule bound to the model whose score it follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRule {
    pub kind: RuleKind,
    pub model: ParamDensity,
}

impl UpdateRule {
    pub fn new(kind: RuleKind, model: ParamDensity) -> Result<UpdateRule> {
        kind.validate()?;
        Ok(UpdateRule { kind, model })
    }

    pub fn score_driven(model: ParamDensity, alpha: f64) -> Result<UpdateRule> {
        UpdateRule::new(RuleKind::sd(alpha), model)
    }

    pub fn anti_score(model: ParamDensity, alpha: f64) -> Result<UpdateRule> {
        UpdateRule::new(RuleKind::AntiScore { alpha }, model)
    }

    /// `φ_κ`, this rule with every step multiplied by `kappa`.
    pub fn downscaled(&self, kappa: f64) -> Result<UpdateRule> {
        UpdateRule::new(
            RuleKind::Downscaled {
                base: Box::new(self.kind.clone()),
                kappa,
            },
            self.model,
        )
    }

    pub fn lazy(&self, q: f64) -> Result<UpdateRule> {
        UpdateRule::new(
            RuleKind::Lazy {
                base: Box::new(self.kind.clone()),
                q,
            },
            self.model,
        )
    }

    pub fn is_deterministic(&self) -> bool {
        self.kind.is_deterministic()
    }

    /// The weighted branches `Δφ(y, θ)`; weights sum to one.
    pub fn delta(&self, y: f64, theta: f64) -> Result<Vec<Branch>> {
        self.model.check_outcome(y)?;
        self.model.check_theta(theta)?;
        self.kind.check_tilde(theta)?;
        Ok(self.delta_unchecked(y, theta))
    }

    pub(crate) fn delta_unchecked(&self, y: f64, theta: f64) -> Vec<Branch> {
        let mut out = Vec::with_capacity(2);
        self.kind
            .push_branches(&self.model, y, theta, 1.0, 1.0, &mut out);
        out
    }

    /// `Δφ(y, θ)` of a deterministic rule.
    pub fn single_delta(&self, y: f64, theta: f64) -> Result<f64> {
        if !self.is_deterministic() {
            return Err(Error::invalid(format!(
                "rule {} is a mixture; test its branches individually",
                self.kind.id()
            )));
        }
        Ok(self.delta(y, theta)?[0].delta)
    }

    /// Whether `sign(Δφ(y, θ)) = sign(∇(y, θ))` for a deterministic rule.
    pub fn is_score_equivalent_at(&self, y: f64, theta: f64) -> Result<Equivalence> {
        let d = self.single_delta(y, theta)?;
        let s = self.model.score(y, theta);
        Ok(match (Sign::of(d), Sign::of(s)) {
            (Sign::Zero, Sign::Zero) => Equivalence::Zero,
            (a, b) if a == b => Equivalence::Yes,
            _ => Equivalence::No,
        })
    }

    /// Moments of `Δφ(Y, θ)` and `∇(Y, θ)` for `Y` drawn from `truth`.
    pub fn moments(&self, theta: f64, truth: &DensityAt, quad: &QuadSpec) -> Result<MomentSummary> {
        self.model.check_theta(theta)?;
        self.kind.check_tilde(theta)?;
        let window = truth.truncation_bounds(quad.tail_mass)?;
        let breaks = truth.breakpoints();
        let tol = quad.tolerance();
        let expect = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
            Ok(
                quad::integrate_split(|y| g(y) * truth.pdf(y), window.lo, window.hi, &breaks, tol)?
                    .value,
            )
        };
        let e_score = expect(&|y| self.model.score(y, theta))?;
        let var_score = expect(&|y| {
            let c = self.model.score(y, theta) - e_score;
            c * c
        })?;
        let e_delta = expect(&|y| {
            self.delta_unchecked(y, theta)
                .iter()
                .map(|b| b.weight * b.delta)
                .sum()
        })?;
        let e_delta_sq = expect(&|y| {
            self.delta_unchecked(y, theta)
                .iter()
                .map(|b| b.weight * b.delta * b.delta)
                .sum()
        })?;
        Ok(MomentSummary {
            e_delta,
            e_delta_sq: e_delta_sq.max(e_delta * e_delta),
            e_score,
            var_score: var_score.max(0.0),
        })
    }

    /// Whether `E[Δφ]·E[∇]` is positive, negative, or within [`SIGN_EPS`] of zero.
    pub fn is_score_equivalent_in_expectation(
        &self,
        theta: f64,
        truth: &DensityAt,
        quad: &QuadSpec,
    ) -> Result<Equivalence> {
        let m = self.moments(theta, truth, quad)?;
        Ok(equivalence_of_product(m.e_delta * m.e_score))
    }
}

pub(crate) fn equivalence_of_product(x: f64) -> Equivalence {
    match Sign::with_tolerance(x, SIGN_EPS) {
        Sign::Positive => Equivalence::Yes,
        Sign::Negative => Equivalence::No,
        Sign::Zero => Equivalence::Zero,
    }
}

/// Linear prediction step `θ_next = ω + β·θ_upd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    omega: f64,
    beta: f64,
}

impl Prediction {
    pub const IDENTITY: Prediction = Prediction {
        omega: 0.0,
        beta: 1.0,
    };

    /// Requires a stationary `|β| < 1`, or the identity `ω = 0, β = 1`.
    pub fn new(omega: f64, beta: f64) -> Result<Prediction> {
        let identity = omega == 0.0 && beta == 1.0;
        if !omega.is_finite() || !(beta.abs() < 1.0 || identity) {
            return Err(Error::invalid(format!(
                "prediction (ω = {omega}, β = {beta}) is not stationary"
            )));
        }
        Ok(Prediction { omega, beta })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn apply(&self, theta_upd: f64) -> f64 {
        self.omega + self.beta * theta_upd
    }
}

/// `ω + β·θ_upd`.
pub fn predict(theta_upd: f64, omega: f64, beta: f64) -> Result<f64> {
    Ok(Prediction::new(omega, beta)?.apply(theta_upd))
}
