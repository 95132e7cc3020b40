//! Scalar special functions shared by the density families.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub(crate) fn norm_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Lower tail `P(Z <= z)`, accurate far into the left tail.
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `P(Z > z)`, accurate far into the right tail.
pub(crate) fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `P(a < Z <= b)` without cancellation in either tail.
pub(crate) fn norm_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if b <= 0.0 {
        norm_cdf(b) - norm_cdf(a)
    } else if a >= 0.0 {
        norm_sf(a) - norm_sf(b)
    } else {
        1.0 - norm_cdf(a) - norm_sf(b)
    }
}

/// `log(exp(a) + exp(b))`.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tails_are_complementary() {
        for &z in &[-8.0, -2.5, -0.3, 0.0, 0.7, 3.1, 9.0] {
            assert!((norm_cdf(z) + norm_sf(z) - 1.0).abs() < 1e-15);
        }
        assert!(norm_cdf(-9.0) > 0.0 && norm_cdf(-9.0) < 1e-18);
    }

    #[test]
    fn mass_matches_difference_of_cdfs() {
        let m = norm_mass(0.8, 1.2);
        assert!((m - 0.096_785_728_361_688_42).abs() < 1e-15);
        assert_eq!(norm_mass(1.0, 1.0), 0.0);
        assert!((norm_mass(-1.0, 2.0) - (norm_cdf(2.0) - norm_cdf(-1.0))).abs() < 1e-15);
    }

    #[test]
    fn log_add_exp_is_stable() {
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(
            log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }
}
