//! Convergence rate of the midpoint approximation `∫_B g ≈ 2δ·g(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::special::norm_pdf;

use super::least_squares_slope;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "g", rename_all = "snake_case")]
pub enum TestFunction {
    /// `x²`.
    Square,
    /// Standard normal density.
    StdNormalPdf,
    /// `|x − y_t + offset|`, Lipschitz with a kink at `y_t − offset`.
    KinkedAbs {
        offset: f64,
    },
    Constant {
        value: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, x: f64, y_t: f64) -> f64 {
        match *self {
            TestFunction::Square => x * x,
            TestFunction::StdNormalPdf => norm_pdf(x),
            TestFunction::KinkedAbs { offset } => (x - y_t + offset).abs(),
            TestFunction::Constant { value } => value,
        }
    }

    fn kinks(&self, y_t: f64) -> Vec<f64> {
        match *self {
            TestFunction::KinkedAbs { offset } => vec![y_t - offset],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// `(δ, e(δ))` for every radius, dropped ones included.
    pub errors: Vec<(f64, f64)>,
    /// Radii whose error was below rounding resolution.
    pub dropped: Vec<f64>,
    /// Log-log slope over the retained radii; absent with fewer than two.
    pub slope: Option<f64>,
}

/// `e(δ) = |∫_{y−δ}^{y+δ} g − 2δ·g(y)|` on each radius and the fitted order.
pub fn lemma1(g: TestFunction, y_t: f64, radii: &[f64]) -> Result<Lemma1Report> {
    let gy = g.eval(y_t, y_t);
    // Rounding in g limits e(δ) to a few significant digits at the smallest
    // radii, which is ample for a slope.
    let tol = Tolerance::relative(1e-6);
    let mut errors = Vec::with_capacity(radii.len());
    let mut dropped = Vec::new();
    let mut pts = Vec::new();
    for &d in radii {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!("radius {d} must be positive")));
        }
        let breaks = g.kinks(y_t);
        let diff =
            match quad::integrate_split(|x| g.eval(x, y_t) - gy, y_t - d, y_t + d, &breaks, tol) {
                Ok(r) => r,
                Err(Error::Integration {
                    value,
                    err_estimate,
                    ..
                }) if err_estimate <= 1e-3 * value.abs() => quad::Integral {
                    value,
                    err: err_estimate,
                    evals: 0,
                },
                Err(e) => return Err(e),
            };
        let scale =
            quad::integrate_split(|x| g.eval(x, y_t).abs(), y_t - d, y_t + d, &breaks, tol)?;
        let e = diff.value.abs();
        errors.push((d, e));
        if e <= 100.0 * f64::EPSILON * scale.value.max(d * gy.abs()) || e == 0.0 {
            dropped.push(d);
        } else {
            pts.push((d.ln(), e.ln()));
        }
    }
    Ok(Lemma1Report {
        errors,
        dropped,
        slope: least_squares_slope(&pts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radii() -> Vec<f64> {
        (0..=12)
            .map(|k| 0.1 * 10f64.powf(-(k as f64) / 4.0))
            .collect()
    }

    #[test]
    fn square_matches_antiderivative() {
        let r = lemma1(TestFunction::Square, 1.0, &[0.1]).unwrap();
        assert!((r.errors[0].1 - 2.0 * 0.001 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_has_no_error() {
        let r = lemma1(TestFunction::Constant { value: 2.5 }, 0.3, &radii()).unwrap();
        assert!(r.errors.iter().all(|&(_, e)| e == 0.0));
        assert_eq!(r.slope, None);
    }

    #[test]
    fn slopes() {
        let smooth = lemma1(TestFunction::StdNormalPdf, 0.0, &radii())
            .unwrap()
            .slope
            .unwrap();
        assert!((smooth - 3.0).abs() < 0.05, "{smooth}");
        let kinked = lemma1(TestFunction::KinkedAbs { offset: 0.0 }, 1.0, &radii())
            .unwrap()
            .slope
            .unwrap();
        assert!((kinked - 2.0).abs() < 1e-6, "{kinked}");
        let sq = lemma1(TestFunction::Square, 1.0, &radii())
            .unwrap()
            .slope
            .unwrap();
        assert!((sq - 3.0).abs() < 1e-6);
    }
}
