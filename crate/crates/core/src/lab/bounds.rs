//! Learning-rate bounds, the pseudo-true parameter, and the conditional
//! expected variation comparison.

use serde::{Deserialize, Serialize};

use crate::density::{DensityAt, Interval, ParamDensity};
use crate::divergence::{delta_ekl, learning_rate_bounds, LearningRateBounds};
use crate::error::{Error, Result};
use crate::quad::{self, QuadSpec};
use crate::rules::UpdateRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub delta_ekl: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CevRow {
    pub alpha: f64,
    pub pseudo_truth: f64,
    pub expected_update: f64,
    /// `|θ* − E[θ_upd]| < |θ* − θ_pred|`.
    pub holds: bool,
    pub delta_ekl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaBoundsTable {
    pub bounds: LearningRateBounds,
    /// `Δ^EKL` at `ᾱ_EKL·i/(n+1)`, `i = 1..=n`.
    pub grid: Vec<AlphaRow>,
    /// `Δ^EKL` just past the bound, at `1.01·ᾱ_EKL`.
    pub beyond: AlphaRow,
    pub cev: Vec<CevRow>,
}

impl AlphaBoundsTable {
    pub fn grid_all_negative(&self) -> bool {
        self.grid.iter().all(|r| r.delta_ekl < 0.0)
    }
}

fn ekl_row(
    truth: &DensityAt,
    model: &ParamDensity,
    theta_pred: f64,
    alpha: f64,
    quad: &QuadSpec,
) -> Result<AlphaRow> {
    let rule = UpdateRule::score_driven(*model, alpha)?;
    let r = delta_ekl(truth, &rule, theta_pred, quad)?;
    Ok(AlphaRow {
        alpha,
        delta_ekl: r.value,
        err: r.err_estimate,
    })
}

/// Evaluates the expected difference of the score-driven rule below and just
/// above `ᾱ_EKL`, and the CEV criterion at each of `cev_alphas`.
///
/// `theta_box` brackets the pseudo-true parameter.
#[allow(clippy::too_many_arguments)]
pub fn alpha_bounds(
    truth: &DensityAt,
    model: &ParamDensity,
    theta_pred: f64,
    c: f64,
    grid_n: usize,
    cev_alphas: &[f64],
    theta_box: Interval,
    quad: &QuadSpec,
) -> Result<AlphaBoundsTable> {
    if grid_n == 0 {
        return Err(Error::invalid("alpha grid needs at least one point"));
    }
    let pred = DensityAt::new(*model, theta_pred)?;
    let bounds = learning_rate_bounds(truth, &pred, c, quad)?;
    let bar = bounds.alpha_bar_ekl;
    let grid = (1..=grid_n)
        .map(|i| {
            ekl_row(
                truth,
                model,
                theta_pred,
                bar * i as f64 / (grid_n + 1) as f64,
                quad,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let beyond = ekl_row(truth, model, theta_pred, 1.01 * bar, quad)?;

    let star = if cev_alphas.is_empty() {
        f64::NAN
    } else {
        pseudo_truth(model, truth, theta_box, quad)?
    };
    let cev = cev_alphas
        .iter()
        .map(|&alpha| {
            let rule = UpdateRule::score_driven(*model, alpha)?;
            let m = rule.moments(theta_pred, truth, quad)?;
            let expected_update = theta_pred + m.e_delta;
            Ok(CevRow {
                alpha,
                pseudo_truth: star,
                expected_update,
                holds: (star - expected_update).abs() < (star - theta_pred).abs(),
                delta_ekl: ekl_row(truth, model, theta_pred, alpha, quad)?.delta_ekl,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlphaBoundsTable {
        bounds,
        grid,
        beyond,
        cev,
    })
}

/// Parameter tolerance of [`pseudo_truth`].
pub const PSEUDO_TRUTH_TOL: f64 = 1e-10;

/// `argmax_θ E_p[log f(Y|θ)]` on `interval`.
///
/// Golden-section search on the expected log-likelihood locates the maximum;
/// since the objective is flat to rounding within `sqrt(ε)` of the optimum,
/// the last digits come from bisecting the expected score, which is
/// monotone on the same unimodal interval.
pub fn pseudo_truth(
    model: &ParamDensity,
    truth: &DensityAt,
    interval: Interval,
    quad: &QuadSpec,
) -> Result<f64> {
    let (lo, hi) = (interval.lo, interval.hi);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!(
            "search interval [{lo}, {hi}] must be finite and non-empty"
        )));
    }
    model.check_theta(lo)?;
    model.check_theta(hi)?;
    let w = truth.truncation_bounds(quad.tail_mass)?;
    let breaks = truth.breakpoints();
    let tol = quad.tolerance();
    let expect = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(quad::integrate_split(|y| g(y) * truth.pdf(y), w.lo, w.hi, &breaks, tol)?.value)
    };
    let objective = |th: f64| expect(&|y| model.log_pdf(y, th));
    let slope = |th: f64| expect(&|y| model.score(y, th));

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    while b - a > 1e-6 * (hi - lo) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let edge = 1e-5 * (hi - lo);
    let mid = 0.5 * (a + b);
    if mid - lo < edge || hi - mid < edge {
        return Err(Error::NonBracketing {
            lo,
            hi,
            at: if mid - lo < edge { lo } else { hi },
        });
    }

    // Widen the final bracket until the expected score changes sign across it.
    let mut width = (b - a).max(1e-8);
    let (mut a, mut b) = (mid - width, mid + width);
    while slope(a)? <= 0.0 || slope(b)? >= 0.0 {
        width *= 4.0;
        a = (mid - width).max(lo);
        b = (mid + width).min(hi);
        if a == lo && b == hi {
            break;
        }
    }
    while b - a > PSEUDO_TRUTH_TOL {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if slope(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
