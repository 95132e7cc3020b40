//! Kullback-Leibler divergence, its trimmed, censored and expected
//! variants, their update differences, and the learning-rate bounds.
//!
//! Differences between two divergences are never formed by subtracting two
//! separately integrated values. Each difference is rewritten as a single
//! integrand in the log-ratio `g = log f_upd − log f_pred`, so that the
//! common part cancels before quadrature rather than after.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{DensityAt, Interval, ParamDensity};
use crate::error::{Error, Result};
use crate::quad::{self, EklMethod, QuadSpec, Tolerance};
use crate::rules::UpdateRule;
use crate::SIGN_EPS;

/// Smallest complement mass for which the censoring term is evaluated.
pub const MIN_OUTSIDE_MASS: f64 = 1e-12;

/// The localization set `B = [center − radius, center + radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: f64, radius: f64) -> Result<Ball> {
        if !center.is_finite() {
            return Err(Error::invalid(format!(
                "ball center {center} is not finite"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius {radius} must be positive and finite"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn contains(&self, y: f64) -> bool {
        (y - self.center).abs() <= self.radius
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.lo(),
            hi: self.hi(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    NestedQuadrature,
    MonteCarlo,
}

/// A divergence value with its numerical provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub value: f64,
    /// The value before clamping tiny negative round-off to zero.
    #[serde(skip)]
    pub raw_value: f64,
    pub err_estimate: f64,
    pub method: Method,
    #[serde(rename = "seed")]
    pub seed_used: Option<u64>,
}

impl DivergenceReport {
    fn new(value: f64, err_estimate: f64, method: Method) -> DivergenceReport {
        DivergenceReport {
            value,
            raw_value: value,
            err_estimate: err_estimate.abs(),
            method,
            seed_used: None,
        }
    }

    /// Replaces values in `[−abs_tol, 0)` by zero, keeping the raw value.
    fn clamped(mut self, abs_tol: f64) -> DivergenceReport {
        if self.value < 0.0 && self.value >= -abs_tol {
            self.value = 0.0;
        }
        self
    }
}

/// The two update differences of the localized criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedDeltas {
    pub delta_tkl: f64,
    pub delta_ckl: f64,
    pub err_tkl: f64,
    pub err_ckl: f64,
    pub theta_upd: f64,
}

/// Weighted and censored likelihood scores of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringRules {
    pub wl: f64,
    pub cl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateBounds {
    pub alpha_bar_ekl: f64,
    pub alpha_bar_cev: f64,
    pub e_score: f64,
    pub var_score: f64,
}

fn gaussian_kl(mp: f64, vp: f64, mf: f64, vf: f64) -> f64 {
    let r = vp / vf;
    let d = mp - mf;
    // r − 1 − ln r without cancellation near r = 1.
    0.5 * (((r - 1.0) - (r - 1.0).ln_1p()) + d * d / vf)
}

fn merged_breaks(a: &DensityAt, b: &DensityAt) -> Vec<f64> {
    let mut v = a.breakpoints();
    v.extend(b.breakpoints());
    v
}

/// `KL(p ‖ f)`, in closed form when both densities are Gaussian.
pub fn kl(truth: &DensityAt, model: &DensityAt, quad: &QuadSpec) -> Result<DivergenceReport> {
    if let (Some((mp, vp)), Some((mf, vf))) = (truth.gaussian_moments(), model.gaussian_moments()) {
        return Ok(
            DivergenceReport::new(gaussian_kl(mp, vp, mf, vf), 0.0, Method::ClosedForm)
                .clamped(quad.abs_tol),
        );
    }
    kl_quadrature(truth, model, quad)
}

/// `KL(p ‖ f)` by quadrature over the truth's truncation window.
pub fn kl_quadrature(
    truth: &DensityAt,
    model: &DensityAt,
    quad: &QuadSpec,
) -> Result<DivergenceReport> {
    let w = truth.truncation_bounds(quad.tail_mass)?;
    let r = quad::integrate_split(
        |x| {
            let p = truth.pdf(x);
            if p == 0.0 {
                0.0
            } else {
                (truth.log_pdf(x) - model.log_pdf(x)) * p
            }
        },
        w.lo,
        w.hi,
        &merged_breaks(truth, model),
        quad.tolerance(),
    )?;
    Ok(DivergenceReport::new(r.value, r.err, Method::Quadrature).clamped(quad.abs_tol))
}

fn ball_integral(
    truth: &DensityAt,
    model: &DensityAt,
    ball: &Ball,
    tol: Tolerance,
) -> Result<quad::Integral> {
    quad::integrate_split(
        |x| (truth.log_pdf(x) - model.log_pdf(x)) * truth.pdf(x),
        ball.lo(),
        ball.hi(),
        &merged_breaks(truth, model),
        tol,
    )
}

/// Trimmed measure `∫_B log(p/f)·p`; it can be negative.
pub fn tkl(
    truth: &DensityAt,
    model: &DensityAt,
    ball: &Ball,
    quad: &QuadSpec,
) -> Result<DivergenceReport> {
    let r = ball_integral(truth, model, ball, quad.tolerance())?;
    Ok(DivergenceReport::new(r.value, r.err, Method::Quadrature))
}

/// Censored divergence `∫_B log(p/f)·p + P(Bᶜ)·log(P(Bᶜ)/F(Bᶜ))`.
pub fn ckl(
    truth: &DensityAt,
    model: &DensityAt,
    ball: &Ball,
    quad: &QuadSpec,
) -> Result<DivergenceReport> {
    let p_out = truth.mass_outside(ball.lo(), ball.hi())?;
    let f_out = model.mass_outside(ball.lo(), ball.hi())?;
    if p_out < MIN_OUTSIDE_MASS || f_out < MIN_OUTSIDE_MASS {
        return Err(Error::DegenerateLocalization {
            truth_mass: p_out,
            model_mass: f_out,
        });
    }
    let r = ball_integral(truth, model, ball, quad.tolerance())?;
    let value = r.value + p_out * (p_out / f_out).ln();
    Ok(DivergenceReport::new(value, r.err, Method::Quadrature).clamped(quad.abs_tol))
}

/// `log(1 − u) + u`, accurate for small `u`.
fn log1m_plus(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        -u2 * (0.5 + u * (1.0 / 3.0 + u * 0.25))
    } else {
        (-u).ln_1p() + u
    }
}

/// Localized update differences `TKL(p‖f_upd) − TKL(p‖f_pred)` and
/// `CKL(p‖f_upd) − CKL(p‖f_pred)` on the ball of radius `delta` around `y_t`.
pub fn localized_deltas(
    rule: &UpdateRule,
    y_t: f64,
    theta_pred: f64,
    truth: &DensityAt,
    delta: f64,
    quad: &QuadSpec,
) -> Result<LocalizedDeltas> {
    let step = rule.single_delta(y_t, theta_pred)?;
    let theta_upd = theta_pred + step;
    rule.model.check_theta(theta_upd)?;
    let ball = Ball::new(y_t, delta)?;
    localized_deltas_between(&rule.model, theta_pred, theta_upd, truth, &ball, quad)
}

/// As [`localized_deltas`], for an explicit pair of model parameters.
pub fn localized_deltas_between(
    model: &ParamDensity,
    theta_pred: f64,
    theta_upd: f64,
    truth: &DensityAt,
    ball: &Ball,
    quad: &QuadSpec,
) -> Result<LocalizedDeltas> {
    model.check_theta(theta_pred)?;
    model.check_theta(theta_upd)?;
    let p_out = truth.mass_outside(ball.lo(), ball.hi())?;
    let f_out = model.mass_outside(ball.lo(), ball.hi(), theta_pred)?;
    if p_out < MIN_OUTSIDE_MASS || f_out < MIN_OUTSIDE_MASS {
        return Err(Error::DegenerateLocalization {
            truth_mass: p_out,
            model_mass: f_out,
        });
    }
    if theta_upd == theta_pred {
        return Ok(LocalizedDeltas {
            delta_tkl: 0.0,
            delta_ckl: 0.0,
            err_tkl: 0.0,
            err_ckl: 0.0,
            theta_upd,
        });
    }

    let mut breaks = truth.breakpoints();
    breaks.extend(model.breakpoints());
    let pts = quad::break_points(ball.lo(), ball.hi(), &breaks);
    let tol = Tolerance::relative(quad.rel_tol).with_abs(0.0);
    let tol = Tolerance {
        max_depth: quad.max_depth,
        ..tol
    };
    let g = |x: f64| model.log_pdf(x, theta_upd) - model.log_pdf(x, theta_pred);
    let ratio = p_out / f_out;

    // TKL part: −∫_B g·p.
    let t = quad::integrate_carrying(|x| Ok((g(x) * truth.pdf(x), 0.0)), &pts, tol)?;
    // F_upd(B) − F_pred(B) = ∫_B f_pred·expm1(g).
    let d = quad::integrate_carrying(
        |x| Ok((model.pdf(x, theta_pred) * g(x).exp_m1(), 0.0)),
        &pts,
        tol,
    )?;
    // Leading terms of both parts of the censored difference, combined.
    let j = quad::integrate_carrying(
        |x| {
            let gx = g(x);
            Ok((
                gx * truth.pdf(x) - ratio * model.pdf(x, theta_pred) * gx.exp_m1(),
                0.0,
            ))
        },
        &pts,
        tol,
    )?;
    let u = d.value / f_out;
    let delta_ckl = -j.value - p_out * log1m_plus(u);
    let err_ckl = j.err + p_out * (u.abs() / (1.0 - u).abs()) * d.err / f_out;
    Ok(LocalizedDeltas {
        delta_tkl: -t.value,
        delta_ckl,
        err_tkl: t.err,
        err_ckl,
        theta_upd,
    })
}

/// `KL(p‖f_upd) − KL(p‖f_pred)` over the whole outcome space.
pub fn delta_kl(
    truth: &DensityAt,
    model: &ParamDensity,
    theta_pred: f64,
    theta_upd: f64,
    quad: &QuadSpec,
) -> Result<DivergenceReport> {
    let pred = DensityAt::new(*model, theta_pred)?;
    let upd = DensityAt::new(*model, theta_upd)?;
    if let (Some((mp, vp)), Some((m0, v0)), Some((m1, v1))) = (
        truth.gaussian_moments(),
        pred.gaussian_moments(),
        upd.gaussian_moments(),
    ) {
        let v = gaussian_kl(mp, vp, m1, v1) - gaussian_kl(mp, vp, m0, v0);
        return Ok(DivergenceReport::new(v, 0.0, Method::ClosedForm));
    }
    let r = inner_log_ratio(
        truth,
        model,
        theta_pred,
        theta_upd,
        quad.tolerance(),
        quad.tail_mass,
    )?;
    Ok(DivergenceReport::new(r.value, r.err, Method::Quadrature))
}

/// `∫ p(x)·(log f(x|θ_pred) − log f(x|θ_upd)) dx` over the truth's window.
fn inner_log_ratio(
    truth: &DensityAt,
    model: &ParamDensity,
    theta_pred: f64,
    theta_upd: f64,
    tol: Tolerance,
    tail_mass: f64,
) -> Result<quad::Integral> {
    let w = truth.truncation_bounds(tail_mass)?;
    let mut breaks = truth.breakpoints();
    breaks.extend(model.breakpoints());
    quad::integrate_split(
        |x| (model.log_pdf(x, theta_pred) - model.log_pdf(x, theta_upd)) * truth.pdf(x),
        w.lo,
        w.hi,
        &breaks,
        tol,
    )
}

/// Branch-averaged inner integral at one outer node `y`, with its error.
fn ekl_node(
    truth: &DensityAt,
    rule: &UpdateRule,
    theta_pred: f64,
    y: f64,
    quad: &QuadSpec,
) -> Result<(f64, f64)> {
    let mut value = 0.0;
    let mut err = 0.0;
    for b in rule.delta_unchecked(y, theta_pred) {
        if b.weight == 0.0 || b.delta == 0.0 {
            continue;
        }
        let theta_upd = theta_pred + b.delta;
        let inner = rule
            .model
            .check_theta(theta_upd)
            .and_then(|_| {
                inner_log_ratio(
                    truth,
                    &rule.model,
                    theta_pred,
                    theta_upd,
                    quad.tolerance(),
                    quad.tail_mass,
                )
            })
            .map_err(|e| Error::Nested {
                node: y,
                source: Box::new(e),
            })?;
        value += b.weight * inner.value;
        err += b.weight * inner.err;
    }
    Ok((value, err))
}

/// Expected difference `E_y[KL(p‖f(·|φ(y, θ_pred)))] − KL(p‖f(·|θ_pred))`.
pub fn delta_ekl(
    truth: &DensityAt,
    rule: &UpdateRule,
    theta_pred: f64,
    quad: &QuadSpec,
) -> Result<DivergenceReport> {
    quad.validate()?;
    rule.model.check_theta(theta_pred)?;
    let w = truth.truncation_bounds(quad.tail_mass)?;
    match quad.ekl_method {
        EklMethod::NestedQuadrature => {
            let mut breaks = truth.breakpoints();
            breaks.extend(rule.model.breakpoints());
            let pts = quad::break_points(w.lo, w.hi, &breaks);
            let r = quad::integrate_carrying(
                |y| {
                    let p = truth.pdf(y);
                    let (v, e) = ekl_node(truth, rule, theta_pred, y, quad)?;
                    Ok((p * v, p * e))
                },
                &pts,
                quad.outer_tolerance(),
            )?;
            Ok(DivergenceReport::new(
                r.value,
                r.err,
                Method::NestedQuadrature,
            ))
        }
        EklMethod::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(quad.seed);
            let n = quad.mc_draws;
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for i in 0..n {
                let y = truth.sample(&mut rng);
                let (v, _) = ekl_node(truth, rule, theta_pred, y, quad)?;
                let d = v - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (v - mean);
            }
            let se = (m2 / ((n - 1) as f64) / n as f64).sqrt();
            let mut rep = DivergenceReport::new(mean, se, Method::MonteCarlo);
            rep.seed_used = Some(quad.seed);
            Ok(rep)
        }
    }
}

/// Expected divergence of the updated model, `KL(p‖f_pred) + Δ^EKL`.
pub fn ekl(
    truth: &DensityAt,
    rule: &UpdateRule,
    theta_pred: f64,
    quad: &QuadSpec,
) -> Result<DivergenceReport> {
    let base = kl(truth, &DensityAt::new(rule.model, theta_pred)?, quad)?;
    let d = delta_ekl(truth, rule, theta_pred, quad)?;
    let mut rep = DivergenceReport::new(
        base.value + d.value,
        base.err_estimate + d.err_estimate,
        d.method,
    );
    rep.seed_used = d.seed_used;
    Ok(rep.clamped(quad.abs_tol))
}

/// Weighted (`wl`) and censored (`cl`) likelihood scores of `y` on `ball`.
pub fn scoring_rules(model: &DensityAt, y: f64, ball: &Ball) -> Result<ScoringRules> {
    model.density.check_outcome(y)?;
    let f_out = model.mass_outside(ball.lo(), ball.hi())?;
    if f_out < MIN_OUTSIDE_MASS {
        return Err(Error::DegenerateLocalization {
            truth_mass: f64::NAN,
            model_mass: f_out,
        });
    }
    if ball.contains(y) {
        let l = model.log_pdf(y);
        Ok(ScoringRules { wl: l, cl: l })
    } else {
        Ok(ScoringRules {
            wl: 0.0,
            cl: f_out.ln(),
        })
    }
}

/// Largest learning rates with guaranteed expected-KL reduction and with
/// the conditional-expected-variation guarantee, for curvature bound `c`.
pub fn learning_rate_bounds(
    truth: &DensityAt,
    model: &DensityAt,
    c: f64,
    quad: &QuadSpec,
) -> Result<LearningRateBounds> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!(
            "curvature bound c = {c} must be positive"
        )));
    }
    let rule = UpdateRule::score_driven(model.density, 1.0)?;
    let m = rule.moments(model.theta, truth, quad)?;
    if m.e_score.abs() < SIGN_EPS {
        return Err(Error::DegenerateScenario(format!(
            "expected score {:e} vanishes at θ = {}",
            m.e_score, model.theta
        )));
    }
    let e2 = m.e_score * m.e_score;
    let alpha_bar_cev = 2.0 / c;
    Ok(LearningRateBounds {
        alpha_bar_ekl: alpha_bar_cev * e2 / (e2 + m.var_score),
        alpha_bar_cev,
        e_score: m.e_score,
        var_score: m.var_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Family;
    use approx::assert_relative_eq;

    fn gl() -> ParamDensity {
        ParamDensity::gaussian_location(1.0).unwrap()
    }

    fn n(m: f64) -> DensityAt {
        DensityAt::new(gl(), m).unwrap()
    }

    fn q() -> QuadSpec {
        QuadSpec::default()
    }

    #[test]
    fn kl_examples() {
        let r = kl(&n(1.0), &n(0.0), &q()).unwrap();
        assert_eq!(r.method, Method::ClosedForm);
        assert_eq!(r.err_estimate, 0.0);
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-15);
        assert_relative_eq!(
            kl(&n(0.0), &n(0.1), &q()).unwrap().value,
            0.005,
            max_relative = 1e-12
        );
        assert_eq!(kl(&n(0.3), &n(0.3), &q()).unwrap().value, 0.0);

        let by_quad = kl_quadrature(&n(1.0), &n(0.0), &q()).unwrap();
        assert_relative_eq!(by_quad.value, 0.5, max_relative = 1e-9);
        assert_eq!(kl_quadrature(&n(0.3), &n(0.3), &q()).unwrap().value, 0.0);
    }

    #[test]
    fn clamping_keeps_raw_value() {
        let r = DivergenceReport::new(-1e-16, 0.0, Method::Quadrature).clamped(1e-14);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.raw_value, -1e-16);
        let r = DivergenceReport::new(-1e-3, 0.0, Method::Quadrature).clamped(1e-14);
        assert_eq!(r.value, -1e-3);
    }

    #[test]
    fn gaussian_scale_kl_matches_quadrature() {
        let s = ParamDensity::gaussian_scale();
        let p = DensityAt::new(s, 2.0).unwrap();
        let f = DensityAt::new(s, 0.7).unwrap();
        let closed = kl(&p, &f, &q()).unwrap().value;
        let quad = kl_quadrature(&p, &f, &q()).unwrap().value;
        assert_relative_eq!(closed, quad, max_relative = 1e-8);
    }

    #[test]
    fn tkl_examples() {
        let b = Ball::new(1.0, 0.1).unwrap();
        assert_eq!(tkl(&n(0.4), &n(0.4), &b, &q()).unwrap().value, 0.0);
        assert!(tkl(&n(0.0), &n(0.1), &b, &q()).unwrap().value < 0.0);
        let wide = Ball::new(0.0, 7.5).unwrap();
        let t = tkl(&n(1.0), &n(0.0), &wide, &q()).unwrap().value;
        assert!((t - 0.5).abs() < 1e-8);
    }

    #[test]
    fn ckl_examples() {
        let b = Ball::new(1.0, 0.05).unwrap();
        assert!(ckl(&n(0.2), &n(0.2), &b, &q()).unwrap().value.abs() <= 1e-14);
        assert!(ckl(&n(1.5), &n(0.0), &b, &q()).unwrap().value > 0.0);
        let far = Ball::new(0.0, 9.0).unwrap();
        assert!(matches!(
            ckl(&n(0.0), &n(0.0), &far, &q()),
            Err(Error::DegenerateLocalization { .. })
        ));
    }

    #[test]
    fn ckl_only_sees_the_ball_and_its_complement_mass() {
        let pw = |s: f64| {
            ParamDensity::new(Family::PiecewiseTest {
                lo: 0.5,
                hi: 1.5,
                outer_scale: s,
            })
            .unwrap()
        };
        let truth = n(0.8);
        let b = Ball::new(1.0, 0.5).unwrap();
        let a = ckl(&truth, &DensityAt::new(pw(1.0), 0.1).unwrap(), &b, &q())
            .unwrap()
            .value;
        let c = ckl(&truth, &DensityAt::new(pw(3.0), 0.1).unwrap(), &b, &q())
            .unwrap()
            .value;
        assert!((a - c).abs() < 1e-12, "{a} vs {c}");
        let ka = kl(&truth, &DensityAt::new(pw(1.0), 0.1).unwrap(), &q())
            .unwrap()
            .value;
        let kc = kl(&truth, &DensityAt::new(pw(3.0), 0.1).unwrap(), &q())
            .unwrap()
            .value;
        assert!((ka - kc).abs() > 1e-3);
    }

    #[test]
    fn localized_deltas_pathology() {
        let rule = UpdateRule::score_driven(gl(), 0.1).unwrap();
        let d = localized_deltas(&rule, 1.0, 0.0, &n(0.0), 0.2, &q()).unwrap();
        assert!(d.delta_tkl < 0.0);
        assert!((d.delta_tkl + 9e-3).abs() < 1e-3, "{}", d.delta_tkl);
        let direct = tkl(&n(0.0), &n(0.1), &Ball::new(1.0, 0.2).unwrap(), &q())
            .unwrap()
            .value
            - tkl(&n(0.0), &n(0.0), &Ball::new(1.0, 0.2).unwrap(), &q())
                .unwrap()
                .value;
        assert_relative_eq!(d.delta_tkl, direct, max_relative = 1e-8);
        let global = delta_kl(&n(0.0), &gl(), 0.0, 0.1, &q()).unwrap().value;
        assert_relative_eq!(global, 0.005, max_relative = 1e-10);
    }

    #[test]
    fn localized_deltas_match_direct_differences() {
        let rule = UpdateRule::score_driven(gl(), 0.3).unwrap();
        let b = Ball::new(1.0, 0.4).unwrap();
        let d = localized_deltas(&rule, 1.0, 0.0, &n(1.5), 0.4, &q()).unwrap();
        let direct = ckl(&n(1.5), &n(0.3), &b, &q()).unwrap().raw_value
            - ckl(&n(1.5), &n(0.0), &b, &q()).unwrap().raw_value;
        assert_relative_eq!(d.delta_ckl, direct, max_relative = 1e-7);
    }

    #[test]
    fn localized_deltas_small_step_sign() {
        let rule = UpdateRule::score_driven(gl(), 1e-3).unwrap();
        let d = localized_deltas(&rule, 1.0, 0.0, &n(1.5), 1e-6, &q()).unwrap();
        assert!(d.delta_ckl < 0.0);
        assert!(d.delta_ckl.abs() > 10.0 * d.err_ckl);
    }

    #[test]
    fn zero_step_gives_zero_deltas() {
        let rule = UpdateRule::score_driven(gl(), 0.5).unwrap();
        let d = localized_deltas(&rule, 0.3, 0.3, &n(1.0), 0.1, &q()).unwrap();
        assert_eq!((d.delta_tkl, d.delta_ckl), (0.0, 0.0));
    }

    fn closed_delta_ekl(alpha: f64, m: f64) -> f64 {
        (alpha * alpha * (1.0 + m * m) - 2.0 * alpha * m * m) / 2.0
    }

    #[test]
    fn ekl_examples() {
        let sd = |a: f64| UpdateRule::score_driven(gl(), a).unwrap();
        assert_relative_eq!(
            ekl(&n(1.0), &sd(0.5), 0.0, &q()).unwrap().value,
            0.25,
            max_relative = 1e-7
        );
        assert_relative_eq!(
            ekl(&n(0.0), &sd(0.1), 0.0, &q()).unwrap().value,
            0.005,
            max_relative = 1e-7
        );
        let d = delta_ekl(&n(1.0), &sd(0.5), 0.0, &q()).unwrap();
        assert_eq!(d.method, Method::NestedQuadrature);
        assert_relative_eq!(d.value, closed_delta_ekl(0.5, 1.0), max_relative = 1e-7);
        assert_relative_eq!(
            delta_ekl(&n(0.0), &sd(0.1), 0.0, &q()).unwrap().value,
            0.005,
            max_relative = 1e-7
        );
    }

    #[test]
    fn ekl_of_frozen_rule_is_kl() {
        let t = DensityAt::new(
            ParamDensity::new(Family::GaussianMixture2 {
                weight: 0.5,
                mean1: -1.0,
                sd1: 1.0,
                mean2: 3.0,
                sd2: 1.0,
            })
            .unwrap(),
            0.0,
        )
        .unwrap();
        // Constructed directly: the validating constructor rejects α = 0.
        let frozen = UpdateRule {
            kind: crate::rules::RuleKind::sd(0.0),
            model: gl(),
        };
        let e = ekl(&t, &frozen, 0.5, &q()).unwrap();
        let k = kl(&t, &n(0.5), &q()).unwrap();
        assert_eq!(e.value, k.value);
        assert_eq!(delta_ekl(&t, &frozen, 0.5, &q()).unwrap().value, 0.0);
    }

    #[test]
    fn monte_carlo_ekl_agrees_with_nested() {
        let rule = UpdateRule::score_driven(gl(), 0.5).unwrap();
        let mc = QuadSpec {
            ekl_method: EklMethod::MonteCarlo,
            mc_draws: 100_000,
            seed: 3,
            rel_tol: 1e-6,
            ..QuadSpec::default()
        };
        let r = delta_ekl(&n(1.0), &rule, 0.0, &mc).unwrap();
        assert_eq!(r.seed_used, Some(3));
        assert!((r.value - closed_delta_ekl(0.5, 1.0)).abs() < 4.0 * r.err_estimate);
        let again = delta_ekl(&n(1.0), &rule, 0.0, &mc).unwrap();
        assert_eq!(r.value, again.value);
    }

    #[test]
    fn scoring_rule_examples() {
        let f = n(0.0);
        let a = Ball::new(0.0, 1.0).unwrap();
        let out = scoring_rules(&f, 3.0, &a).unwrap();
        assert_eq!(out.wl, 0.0);
        assert!((out.cl - (0.3173f64).ln()).abs() < 2e-4);
        assert_relative_eq!(out.cl, -1.147_874_464_449_318, max_relative = 1e-12);
        let inside = scoring_rules(&f, 0.5, &a).unwrap();
        assert_eq!(inside.cl, f.log_pdf(0.5));
        assert_eq!(inside.wl, f.log_pdf(0.5));
    }

    #[test]
    fn learning_rate_examples() {
        let b = learning_rate_bounds(&n(1.0), &n(0.0), 1.0, &q()).unwrap();
        assert!((b.alpha_bar_ekl - 1.0).abs() < 1e-8);
        assert_eq!(b.alpha_bar_cev, 2.0);
        let b = learning_rate_bounds(&n(2.0), &n(0.0), 1.0, &q()).unwrap();
        assert!((b.alpha_bar_ekl - 1.6).abs() < 1e-8);
        let b = learning_rate_bounds(&n(1e-3), &n(0.0), 1.0, &q()).unwrap();
        assert!(b.alpha_bar_ekl < 1e-5 && b.alpha_bar_cev == 2.0);
        assert!(matches!(
            learning_rate_bounds(&n(0.0), &n(0.0), 1.0, &q()),
            Err(Error::DegenerateScenario(_))
        ));
    }

    #[test]
    fn ball_validation() {
        assert!(Ball::new(0.0, 0.0).is_err());
        assert!(Ball::new(f64::NAN, 1.0).is_err());
        let b = Ball::new(1.0, 0.5).unwrap();
        assert!(b.contains(1.5) && !b.contains(1.51));
    }

    #[test]
    fn report_serializes_flat() {
        let mut r = DivergenceReport::new(0.5, 0.0, Method::ClosedForm);
        r.seed_used = Some(4);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(
            s,
            r#"{"value":0.5,"err_estimate":0.0,"method":"closed_form","seed":4}"#
        );
    }
}
