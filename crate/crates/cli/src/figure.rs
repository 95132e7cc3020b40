//! Plot-ready tables for the four-regime illustration.

use std::fmt::Write as _;

use sdkl_core::lab::{Figure1Row, Panel};
use sdkl_core::{Interval, ParamDensity, QuadSpec, UpdateRule};

use crate::config::FigureSpec;
use crate::output::real;
use crate::runner::Artifact;

/// Points per density curve.
pub const CURVE_POINTS: usize = 501;

/// One `x,p,f_pred,f_upd` curve per panel over a shared window, and the
/// table of differences.
pub fn figure_files(
    spec: &FigureSpec,
    panels: &[Panel; 4],
    table: &[Figure1Row],
    quad: &QuadSpec,
) -> sdkl_core::Result<Vec<Artifact>> {
    let model = ParamDensity::gaussian_location(1.0)?;
    let rule = UpdateRule::score_driven(model, spec.alpha)?;
    let theta_upd = spec.theta_pred + rule.single_delta(spec.y_t, spec.theta_pred)?;

    let mut window: Option<Interval> = None;
    for theta in panels
        .iter()
        .map(|p| p.lambda)
        .chain([spec.theta_pred, theta_upd])
    {
        let w = model.truncation_bounds(theta, quad.tail_mass)?;
        window = Some(match window {
            Some(u) => Interval {
                lo: u.lo.min(w.lo),
                hi: u.hi.max(w.hi),
            },
            None => w,
        });
    }
    let window = window.expect("four panels");

    let mut files = Vec::with_capacity(5);
    for p in panels {
        let mut s = String::from("x,p,f_pred,f_upd\n");
        for i in 0..CURVE_POINTS {
            let x = if i + 1 == CURVE_POINTS {
                window.hi
            } else {
                window.lo + window.width() * i as f64 / (CURVE_POINTS - 1) as f64
            };
            let _ = writeln!(
                s,
                "{},{},{},{}",
                real(x),
                real(model.pdf(x, p.lambda)),
                real(model.pdf(x, spec.theta_pred)),
                real(model.pdf(x, theta_upd))
            );
        }
        files.push(Artifact {
            path: format!("figure1/panel_{}.csv", p.label),
            contents: s,
        });
    }

    let mut s = String::from(
        "panel,lambda,p_y,f_pred_y,f_upd_y,delta_tkl,err_tkl,delta_ckl,err_ckl,delta_kl\n",
    );
    for (p, r) in panels.iter().zip(table) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            p.label,
            real(r.lambda),
            real(r.p_y),
            real(r.f_pred_y),
            real(r.f_upd_y),
            real(r.delta_tkl),
            real(r.err_tkl),
            real(r.delta_ckl),
            real(r.err_ckl),
            real(r.delta_kl)
        );
    }
    files.push(Artifact {
        path: "figure1/deltas.csv".into(),
        contents: s,
    });
    Ok(files)
}
