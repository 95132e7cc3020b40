//! Quasi-score-driven variance updates: a Gaussian variance model moved by
//! the score of a Student-t density.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{DensityAt, ParamDensity};
use crate::error::{Error, Result};
use crate::quad::{self, QuadSpec};
use crate::rules::{RuleKind, UpdateRule};
use crate::sign::Sign;
use crate::SIGN_EPS;

use super::{ekl_schedule, Scenario, Schedule, SignReport};

/// `2θ²` times the expected model score and expected Student-t score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QsdFactors {
    /// `E[Y² − θ]`.
    pub factor1: f64,
    /// `E[(ν+1)·Y²/(ν − 2 + Y²/θ) − θ]`.
    pub factor2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsdReport {
    pub factors: QsdFactors,
    pub report: SignReport,
}

fn factor2_integrand(nu: f64, theta: f64, y: f64) -> f64 {
    let y2 = y * y;
    (nu + 1.0) * y2 / (nu - 2.0 + y2 / theta) - theta
}

fn check_inputs(nu: f64, theta: f64, truth: &DensityAt) -> Result<()> {
    if !(nu > 2.0 && nu.is_finite()) {
        return Err(Error::invalid(format!(
            "degrees of freedom {nu} must exceed 2"
        )));
    }
    ParamDensity::gaussian_scale().check_theta(theta)?;
    truth.density.check_theta(truth.theta)
}

pub fn qsd_factors(nu: f64, theta: f64, truth: &DensityAt, quad: &QuadSpec) -> Result<QsdFactors> {
    check_inputs(nu, theta, truth)?;
    let w = truth.truncation_bounds(quad.tail_mass)?;
    let breaks = truth.breakpoints();
    let tol = quad.tolerance();
    let f1 = quad::integrate_split(|y| (y * y - theta) * truth.pdf(y), w.lo, w.hi, &breaks, tol)?;
    let f2 = quad::integrate_split(
        |y| factor2_integrand(nu, theta, y) * truth.pdf(y),
        w.lo,
        w.hi,
        &breaks,
        tol,
    )?;
    Ok(QsdFactors {
        factor1: f1.value,
        factor2: f2.value,
    })
}

/// Sample mean of the second factor and its standard error.
pub fn qsd_factor2_monte_carlo(
    nu: f64,
    theta: f64,
    truth: &DensityAt,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_inputs(nu, theta, truth)?;
    if draws < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..draws {
        let v = factor2_integrand(nu, theta, truth.sample(&mut rng));
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    Ok((mean, (m2 / (draws - 1) as f64 / draws as f64).sqrt()))
}

/// Predicts the expected-divergence sign of the downscaled QSD rule from
/// `−sign(factor1·factor2)` and compares it with the schedule.
pub fn check_qsd(
    nu: f64,
    theta_pred: f64,
    truth: &DensityAt,
    alpha: f64,
    schedule: Schedule,
    quad: &QuadSpec,
) -> Result<QsdReport> {
    let factors = qsd_factors(nu, theta_pred, truth, quad)?;
    let model = ParamDensity::gaussian_scale();
    let tilde = ParamDensity::student_t_scale(nu)?;
    let rule = UpdateRule::new(RuleKind::QuasiScoreDriven { alpha, tilde }, model)?;
    let s = Scenario {
        id: String::new(),
        truth: *truth,
        forward_truth: None,
        theta_pred,
        y_t: 0.0,
        rule,
        schedule,
        quad: *quad,
    };
    s.schedule.validate()?;
    let product = factors.factor1 * factors.factor2;
    let boundary = Sign::with_tolerance(product, SIGN_EPS) == Sign::Zero;
    let steps = ekl_schedule(&s, &s.rule)?;
    Ok(QsdReport {
        factors,
        report: SignReport::new(steps, Sign::of(product).flip(), boundary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::Outcome;

    fn truth(v: f64) -> DensityAt {
        DensityAt::new(ParamDensity::gaussian_scale(), v).unwrap()
    }

    #[test]
    fn factor_examples() {
        let q = QuadSpec::default();
        let f = qsd_factors(5.0, 1.0, &truth(2.0), &q).unwrap();
        assert!((f.factor1 - 1.0).abs() < 1e-9);
        assert!(
            (f.factor2 - 0.697_472_496_326_733_8).abs() < 1e-8,
            "{}",
            f.factor2
        );
        let big = qsd_factors(200.0, 1.0, &truth(2.0), &q).unwrap();
        assert!((big.factor2 - 0.971_684_286_085_571_8).abs() < 1e-8);
        assert!((big.factor2 - big.factor1).abs() < (f.factor2 - f.factor1).abs());
        let matched = qsd_factors(5.0, 1.5, &truth(1.5), &q).unwrap();
        assert!(matched.factor1.abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_factor_agrees() {
        let q = QuadSpec::default();
        let f = qsd_factors(5.0, 1.0, &truth(2.0), &q).unwrap();
        let (m, se) = qsd_factor2_monte_carlo(5.0, 1.0, &truth(2.0), 200_000, 9).unwrap();
        assert!((m - f.factor2).abs() < 3.0 * se + 1e-12, "{m} ± {se}");
    }

    #[test]
    fn sign_check() {
        let sched = Schedule {
            halvings: 6,
            ..Schedule::default()
        };
        let r = check_qsd(5.0, 1.0, &truth(2.0), 1.0, sched, &QuadSpec::default()).unwrap();
        assert_eq!(r.report.predicted, Sign::Negative);
        assert_eq!(r.report.outcome(), Outcome::Agreed, "{:?}", r.report);
        let r = check_qsd(5.0, 1.0, &truth(1.0), 1.0, sched, &QuadSpec::default()).unwrap();
        assert!(r.report.boundary);
    }
}
