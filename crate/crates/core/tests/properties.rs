use proptest::prelude::*;

use sdkl_core::divergence::{ckl, delta_ekl, kl, localized_deltas, tkl};
use sdkl_core::lab::{corrected_ball, update_raises_density_on_ball};
use sdkl_core::{oracle, Ball, DensityAt, Family, ParamDensity, QuadSpec, RuleKind, UpdateRule};

fn gl(sigma: f64) -> ParamDensity {
    ParamDensity::gaussian_location(sigma).unwrap()
}

fn mixture(w: f64) -> ParamDensity {
    ParamDensity::new(Family::GaussianMixture2 {
        weight: w,
        mean1: -1.0,
        sd1: 0.8,
        mean2: 1.2,
        sd2: 1.1,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergences_are_nonnegative(
        m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, s in 0.5f64..2.0, w in 0.1f64..0.9,
        c in -2.0f64..2.0, r in 0.02f64..1.5,
    ) {
        let q = QuadSpec::default();
        let p = DensityAt::new(mixture(w), m1).unwrap();
        let f = DensityAt::new(gl(s), m2).unwrap();
        let ball = Ball::new(c, r).unwrap();
        prop_assert!(kl(&p, &f, &q).unwrap().raw_value >= -1e-10);
        prop_assert!(ckl(&p, &f, &ball, &q).unwrap().raw_value >= -1e-10);
        prop_assert!(ckl(&p, &p, &ball, &q).unwrap().raw_value.abs() <= 1e-10);
    }

    #[test]
    fn closed_form_gaussian_kl_matches_general_path(m in -3.0f64..3.0, s in 0.5f64..2.0) {
        let q = QuadSpec::default();
        let p = DensityAt::new(gl(1.0), 0.0).unwrap();
        let f = DensityAt::new(gl(s), m).unwrap();
        let want = 0.5 * ((1.0 / (s * s)) - 1.0 + 2.0 * s.ln() + m * m / (s * s));
        prop_assert!((kl(&p, &f, &q).unwrap().value - want).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn censored_divergence_ignores_shape_off_the_ball(
        theta in -1.0f64..1.0, lam in -1.5f64..1.5, o1 in 0.3f64..3.0, o2 in 0.3f64..3.0,
    ) {
        let q = QuadSpec::default();
        let ball = Ball::new(0.2, 0.8).unwrap();
        let member = |outer| ParamDensity::new(Family::PiecewiseTest { lo: ball.lo(), hi: ball.hi(), outer_scale: outer }).unwrap();
        let truth = DensityAt::new(gl(1.0), lam).unwrap();
        let a = ckl(&truth, &DensityAt::new(member(o1), theta).unwrap(), &ball, &q).unwrap().value;
        let b = ckl(&truth, &DensityAt::new(member(o2), theta).unwrap(), &ball, &q).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn expected_difference_matches_closed_form(m in -2.0f64..2.0, alpha in 0.02f64..1.5) {
        let q = QuadSpec::default();
        let rule = UpdateRule::score_driven(gl(1.0), alpha).unwrap();
        let got = delta_ekl(&DensityAt::new(gl(1.0), m).unwrap(), &rule, 0.0, &q).unwrap().value;
        let want = oracle::delta_ekl(alpha, m);
        prop_assert!((got - want).abs() <= 1e-7 * oracle::ekl(alpha, m), "{got} vs {want}");
    }

    #[test]
    fn downscaling_and_laziness_scale_the_moments(
        kappa in 0.05f64..1.0, lazy_q in 0.0f64..0.95, y_mean in -2.0f64..2.0, theta in -1.0f64..1.0,
    ) {
        let q = QuadSpec::default();
        let truth = DensityAt::new(gl(1.0), y_mean).unwrap();
        let base = UpdateRule::score_driven(gl(1.0), 0.4).unwrap();
        let m0 = base.moments(theta, &truth, &q).unwrap();
        let md = base.downscaled(kappa).unwrap().moments(theta, &truth, &q).unwrap();
        let ml = base.lazy(lazy_q).unwrap().moments(theta, &truth, &q).unwrap();
        let tol = 1e-9 * (1.0 + m0.e_delta.abs());
        prop_assert!((md.e_delta - kappa * m0.e_delta).abs() <= tol);
        prop_assert!((ml.e_delta - (1.0 - lazy_q) * m0.e_delta).abs() <= tol);
        prop_assert!((md.e_score - m0.e_score).abs() <= 1e-12 * (1.0 + m0.e_score.abs()));
    }

    /// Raising the model density on the whole ball always lowers the trimmed
    /// divergence, whatever the truth.
    #[test]
    fn trimmed_difference_negative_when_update_raises_density(
        lam in -3.0f64..3.0, sigma in 0.5f64..2.0, y in -2.0f64..2.0, theta in -1.0f64..1.0,
        alpha in 0.01f64..0.5, r in 0.01f64..0.3,
    ) {
        let q = QuadSpec::default();
        let rule = UpdateRule::score_driven(gl(1.0), alpha).unwrap();
        let up = theta + rule.single_delta(y, theta).unwrap();
        let ball = Ball::new(y, r).unwrap();
        prop_assume!(update_raises_density_on_ball(&rule.model, theta, up, &ball));
        let truth = DensityAt::new(gl(sigma), lam).unwrap();
        let d = localized_deltas(&rule, y, theta, &truth, r, &q).unwrap();
        prop_assert!(d.delta_tkl < 0.0, "{d:?}");
    }

    #[test]
    fn corrected_ball_is_empty_for_the_model_itself(c in -3.0f64..3.0, r in 0.01f64..2.0, th in -2.0f64..2.0) {
        let f = DensityAt::new(gl(1.0), th).unwrap();
        prop_assert!(corrected_ball(&f, &f, &Ball::new(c, r).unwrap()).is_empty());
    }
}

#[test]
fn trimmed_divergence_can_be_negative() {
    let q = QuadSpec::default();
    let t = tkl(
        &DensityAt::new(gl(1.0), 1.5).unwrap(),
        &DensityAt::new(gl(1.0), 0.0).unwrap(),
        &Ball::new(-0.5, 0.5).unwrap(),
        &q,
    )
    .unwrap();
    assert!(t.value < -1e-3);
}

#[test]
fn localized_differences_shrink_like_alpha_cubed() {
    let q = QuadSpec::default();
    let truth = DensityAt::new(gl(1.0), 1.5).unwrap();
    let pts: Vec<(f64, f64)> = (0..8)
        .map(|k| {
            let a = 0.1 * 0.5f64.powi(k);
            let rule = UpdateRule::new(RuleKind::sd(a), gl(1.0)).unwrap();
            let d = localized_deltas(&rule, 1.0, 0.0, &truth, a * a, &q).unwrap();
            (a.ln(), d.delta_ckl.abs().ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 3.0).abs() < 0.15, "{slope}");
}
