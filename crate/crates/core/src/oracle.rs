//! Closed-form reference values for the unit-variance Gaussian location
//! model with a Gaussian truth `N(λ, 1)` and the plain score-driven rule.
//!
//! These are derived by hand, independently of the numerical paths, and are
//! only compiled for tests. `m = λ − θ_pred` throughout.

use std::f64::consts::PI;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `KL(N(λ, 1) ‖ N(θ, 1))`.
pub fn kl(lambda: f64, theta: f64) -> f64 {
    0.5 * (lambda - theta).powi(2)
}

/// Expected divergence after one score-driven step of size `alpha`.
pub fn ekl(alpha: f64, m: f64) -> f64 {
    ((1.0 - alpha).powi(2) * m * m + alpha * alpha) / 2.0
}

pub fn delta_ekl(alpha: f64, m: f64) -> f64 {
    (alpha * alpha * (1.0 + m * m) - 2.0 * alpha * m * m) / 2.0
}

/// The learning rate at which the expected difference changes sign.
pub fn ekl_sign_change(m: f64) -> f64 {
    2.0 * m * m / (1.0 + m * m)
}

pub fn alpha_bar_ekl(m: f64, c: f64) -> f64 {
    (2.0 / c) * m * m / (m * m + 1.0)
}

pub fn alpha_bar_cev(c: f64) -> f64 {
    2.0 / c
}

/// The pseudo-true location is the mean of the truth.
pub fn pseudo_truth(truth_mean: f64) -> f64 {
    truth_mean
}

/// `E[θ_upd] = θ_pred + α·m`.
pub fn expected_update(theta_pred: f64, alpha: f64, m: f64) -> f64 {
    theta_pred + alpha * m
}

/// Whether the expected update lands strictly closer to the pseudo-truth.
pub fn cev_holds(theta_pred: f64, alpha: f64, m: f64) -> bool {
    let star = theta_pred + m;
    (star - expected_update(theta_pred, alpha, m)).abs() < (star - theta_pred).abs()
}

/// `|∫_{y−δ}^{y+δ} x² dx − 2δy²|`.
pub fn square_lemma_error(delta: f64) -> f64 {
    2.0 * delta.powi(3) / 3.0
}

/// `E[Y²] − θ` for `Y ~ N(0, v)`.
pub fn qsd_factor1(truth_variance: f64, theta: f64) -> f64 {
    truth_variance - theta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn internal_consistency() {
        for &m in &[0.0, 0.5, 1.0, 2.0] {
            for &a in &[0.05, 0.1, 0.5, 1.0] {
                assert!((ekl(a, m) - kl(m, 0.0) - delta_ekl(a, m)).abs() < 1e-15);
            }
        }
        assert_eq!(ekl_sign_change(1.0), 1.0);
        assert_eq!(alpha_bar_ekl(2.0, 1.0), 1.6);
        assert!(cev_holds(0.0, 0.5, 1.0));
        assert!(!cev_holds(0.0, 2.5, 1.0));
        assert!((std_normal_pdf(1.0) - 0.241_970_724_519_143_37).abs() < 1e-16);
    }
}
