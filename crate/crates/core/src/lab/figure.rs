//! The four-regime illustration, the corrected ball, and the impropriety
//! demonstration for the trimmed measure.

use serde::{Deserialize, Serialize};

use crate::density::{DensityAt, Interval, ParamDensity};
use crate::divergence::{delta_kl, localized_deltas, localized_deltas_between, Ball};
use crate::error::Result;
use crate::quad::QuadSpec;
use crate::rules::UpdateRule;

/// Grid size used to resolve sign changes of `p − f` on a ball.
const CORRECTED_GRID: usize = 201;
/// Grid size used to verify `f_upd > f_pred` on a ball.
const RAISE_GRID: usize = 101;

/// Parts of `ball` where the truth is strictly denser than the model,
/// as disjoint intervals in increasing order.
pub fn corrected_ball(truth: &DensityAt, model: &DensityAt, ball: &Ball) -> Vec<Interval> {
    let h = |x: f64| truth.pdf(x) - model.pdf(x);
    let refine = |mut a: f64, mut b: f64| {
        // h(a) and h(b) have opposite signs; returns the crossing.
        let pos_a = h(a) > 0.0;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (h(m) > 0.0) == pos_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let n = CORRECTED_GRID;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                ball.hi()
            } else {
                ball.lo() + 2.0 * ball.radius * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut start: Option<f64> = (h(xs[0]) > 0.0).then_some(xs[0]);
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (pa, pb) = (h(a) > 0.0, h(b) > 0.0);
        if pa != pb {
            let x = refine(a, b);
            if pb {
                start = Some(x);
            } else if let Some(s) = start.take() {
                out.push(Interval { lo: s, hi: x });
            }
        }
    }
    if let Some(s) = start {
        out.push(Interval {
            lo: s,
            hi: ball.hi(),
        });
    }
    out
}

/// Whether `f_upd > f_pred` at every point of an evenly spaced grid over `ball`.
pub fn update_raises_density_on_ball(
    model: &ParamDensity,
    theta_pred: f64,
    theta_upd: f64,
    ball: &Ball,
) -> bool {
    (0..RAISE_GRID).all(|i| {
        let x = ball.lo() + 2.0 * ball.radius * i as f64 / (RAISE_GRID - 1) as f64;
        model.log_pdf(x, theta_upd) > model.log_pdf(x, theta_pred)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub lambda: f64,
    pub p_y: f64,
    pub f_pred_y: f64,
    pub f_upd_y: f64,
    pub delta_tkl: f64,
    pub delta_ckl: f64,
    pub err_tkl: f64,
    pub err_ckl: f64,
    pub delta_kl: f64,
}

/// One Gaussian-location score-driven step from `theta_pred` on observing
/// `y_t`, evaluated against each truth `N(λ, 1)`.
pub fn figure1_data(
    alpha: f64,
    y_t: f64,
    theta_pred: f64,
    lambdas: &[f64],
    delta: f64,
    quad: &QuadSpec,
) -> Result<Vec<Figure1Row>> {
    let model = ParamDensity::gaussian_location(1.0)?;
    let rule = UpdateRule::score_driven(model, alpha)?;
    let theta_upd = theta_pred + rule.single_delta(y_t, theta_pred)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let truth = DensityAt::new(model, lambda)?;
            let d = localized_deltas(&rule, y_t, theta_pred, &truth, delta, quad)?;
            Ok(Figure1Row {
                lambda,
                p_y: truth.pdf(y_t),
                f_pred_y: model.pdf(y_t, theta_pred),
                f_upd_y: model.pdf(y_t, theta_upd),
                delta_tkl: d.delta_tkl,
                delta_ckl: d.delta_ckl,
                err_tkl: d.err_tkl,
                err_ckl: d.err_ckl,
                delta_kl: delta_kl(&truth, &model, theta_pred, theta_upd, quad)?.value,
            })
        })
        .collect()
}

/// A named truth of the illustration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub label: char,
    pub lambda: f64,
}

/// The four regimes: truth at the prediction (a), one step below it (b),
/// at the update (c), and one step beyond it (d), with one step `2·Δφ`
/// for panels b and d.
pub fn figure1_panels(alpha: f64, y_t: f64, theta_pred: f64) -> Result<[Panel; 4]> {
    let model = ParamDensity::gaussian_location(1.0)?;
    let step = UpdateRule::score_driven(model, alpha)?.single_delta(y_t, theta_pred)?;
    let theta_upd = theta_pred + step;
    Ok([
        Panel {
            label: 'a',
            lambda: theta_pred,
        },
        Panel {
            label: 'b',
            lambda: theta_pred - 2.0 * step,
        },
        Panel {
            label: 'c',
            lambda: theta_upd,
        },
        Panel {
            label: 'd',
            lambda: theta_upd + 2.0 * step,
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImproprietyCase {
    pub id: String,
    pub truth: DensityAt,
    pub rule: UpdateRule,
    pub theta_pred: f64,
    pub y_t: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum ImproprietyStatus {
    Passed,
    Failed,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImproprietyRow {
    pub id: String,
    pub status: ImproprietyStatus,
    pub delta_tkl: Option<f64>,
    pub err: Option<f64>,
    /// Whole-space difference, for contrast with the trimmed one.
    pub delta_kl: Option<f64>,
}

/// For every case whose update raises the model density on the whole ball,
/// checks that the trimmed difference is negative, whatever the truth.
pub fn impropriety_demo(cases: &[ImproprietyCase], quad: &QuadSpec) -> Result<Vec<ImproprietyRow>> {
    cases
        .iter()
        .map(|c| {
            let model = c.rule.model;
            let theta_upd = c.theta_pred + c.rule.single_delta(c.y_t, c.theta_pred)?;
            let ball = Ball::new(c.y_t, c.radius)?;
            if model.check_theta(theta_upd).is_err()
                || !update_raises_density_on_ball(&model, c.theta_pred, theta_upd, &ball)
            {
                return Ok(ImproprietyRow {
                    id: c.id.clone(),
                    status: ImproprietyStatus::Skipped(
                        "update does not raise the model density on the ball".into(),
                    ),
                    delta_tkl: None,
                    err: None,
                    delta_kl: None,
                });
            }
            let d =
                localized_deltas_between(&model, c.theta_pred, theta_upd, &c.truth, &ball, quad)?;
            let global = delta_kl(&c.truth, &model, c.theta_pred, theta_upd, quad)?;
            Ok(ImproprietyRow {
                id: c.id.clone(),
                status: if d.delta_tkl < 0.0 {
                    ImproprietyStatus::Passed
                } else {
                    ImproprietyStatus::Failed
                },
                delta_tkl: Some(d.delta_tkl),
                err: Some(d.err_tkl),
                delta_kl: Some(global.value),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gl() -> ParamDensity {
        ParamDensity::gaussian_location(1.0).unwrap()
    }

    fn n(m: f64) -> DensityAt {
        DensityAt::new(gl(), m).unwrap()
    }

    #[test]
    fn corrected_ball_examples() {
        let b = Ball::new(1.0, 0.1).unwrap();
        assert_eq!(corrected_ball(&n(1.5), &n(0.0), &b), vec![b.interval()]);
        assert!(corrected_ball(&n(-1.0), &n(0.0), &b).is_empty());
        assert!(corrected_ball(&n(0.3), &n(0.3), &b).is_empty());
        // p = N(0.5,1) exceeds f = N(0,1) exactly right of 0.25.
        let wide = Ball::new(0.0, 1.0).unwrap();
        let got = corrected_ball(&n(0.5), &n(0.0), &wide);
        assert_eq!(got.len(), 1);
        assert!((got[0].lo - 0.25).abs() < 1e-12 && got[0].hi == 1.0);
    }

    #[test]
    fn panels_and_table() {
        let panels = figure1_panels(0.5, 1.0, 0.0).unwrap();
        let lambdas: Vec<f64> = panels.iter().map(|p| p.lambda).collect();
        assert_eq!(lambdas, vec![0.0, -1.0, 0.5, 1.5]);
        let rows = figure1_data(0.5, 1.0, 0.0, &lambdas, 0.01, &QuadSpec::default()).unwrap();
        assert!(rows[0].delta_tkl < 0.0 && rows[0].delta_kl > 0.0);
        assert!(rows[1].delta_ckl > 0.0);
        assert!(
            rows[2].delta_ckl < 0.0 && rows[3].delta_ckl < 0.0,
            "{rows:?}"
        );
    }

    #[test]
    fn impropriety_examples() {
        let sd = UpdateRule::score_driven(gl(), 0.1).unwrap();
        let anti = UpdateRule::anti_score(gl(), 0.1).unwrap();
        let case = |id: &str, truth: f64, rule: &UpdateRule| ImproprietyCase {
            id: id.into(),
            truth: n(truth),
            rule: rule.clone(),
            theta_pred: 0.0,
            y_t: 1.0,
            radius: 0.2,
        };
        let rows = impropriety_demo(
            &[
                case("self", 0.0, &sd),
                case("far", -3.0, &sd),
                case("anti", 1.0, &anti),
            ],
            &QuadSpec::default(),
        )
        .unwrap();
        assert_eq!(rows[0].status, ImproprietyStatus::Passed);
        assert!(rows[0].delta_kl.unwrap() > 0.0);
        assert_eq!(rows[1].status, ImproprietyStatus::Passed);
        assert!(matches!(rows[2].status, ImproprietyStatus::Skipped(_)));
    }
}
