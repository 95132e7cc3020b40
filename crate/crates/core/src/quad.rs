//! Globally adaptive Gauss-Kronrod (7/15) integration.
//!
//! Each panel is integrated with the 15-point Kronrod rule; the embedded
//! 7-point Gauss rule supplies the error estimate, using the QUADPACK
//! heuristic and its round-off floor. The panel with the largest estimated
//! error is bisected until the total error meets
//! `max(abs_tol, rel_tol * |I|)`, every remaining panel sits at round-off
//! level, or the bisection depth budget is exhausted.

// Tabulated Kronrod nodes and weights are kept at published precision.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Hard cap on live panels, independent of the depth budget.
const MAX_PANELS: usize = 20_000;

/// How the outer expectation of the expected KL divergence is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EklMethod {
    NestedQuadrature,
    MonteCarlo,
}

/// Numerical integration policy shared by every divergence evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadSpec {
    /// Relative tolerance of single integrals.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Mass left outside the integration window in each tail.
    pub tail_mass: f64,
    /// Maximum bisection depth of any panel.
    pub max_depth: u32,
    /// Relative tolerance of the outer integral of nested quadratures.
    pub outer_rel_tol: f64,
    pub ekl_method: EklMethod,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            tail_mass: 1e-12,
            max_depth: 48,
            outer_rel_tol: 1e-7,
            ekl_method: EklMethod::NestedQuadrature,
            mc_draws: 100_000,
            seed: 0,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-4) {
            return Err(Error::invalid(format!(
                "rel_tol {} not in (0, 1e-4]",
                self.rel_tol
            )));
        }
        if !(self.outer_rel_tol > 0.0 && self.outer_rel_tol <= 1e-4) {
            return Err(Error::invalid(format!(
                "outer_rel_tol {} not in (0, 1e-4]",
                self.outer_rel_tol
            )));
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid("abs_tol must be finite and non-negative"));
        }
        if !(self.tail_mass > 0.0 && self.tail_mass <= 1e-10) {
            return Err(Error::invalid(format!(
                "tail_mass {} not in (0, 1e-10]",
                self.tail_mass
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be positive"));
        }
        if self.ekl_method == EklMethod::MonteCarlo && self.mc_draws < 100_000 {
            return Err(Error::invalid(format!(
                "mc_draws {} below 1e5 with Monte Carlo selected",
                self.mc_draws
            )));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_depth: self.max_depth,
        }
    }

    pub fn outer_tolerance(&self) -> Tolerance {
        Tolerance {
            rel: self.outer_rel_tol,
            abs: self.abs_tol,
            max_depth: self.max_depth,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_depth: u32,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance {
            rel,
            abs: 0.0,
            max_depth: 48,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    /// Integral of the caller-supplied error density over the panel.
    carried: f64,
    floor: f64,
    depth: u32,
}

impl Panel {
    fn at_roundoff(&self) -> bool {
        self.err <= self.floor * (1.0 + 1e-12)
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64, depth: u32) -> Result<Panel>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0f64; 15];
    let mut carried = 0.0;

    let (fc, ec) = f(center)?;
    fv[7] = fc;
    carried += WGK[7] * ec.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, e1) = f(center - dx)?;
        let (f2, e2) = f(center + dx)?;
        fv[j] = f1;
        fv[14 - j] = f2;
        carried += WGK[j] * (e1.abs() + e2.abs());
    }
    for (k, v) in fv.iter().enumerate() {
        if !v.is_finite() {
            let x = if k < 7 {
                center - half * XGK[k]
            } else {
                center + half * XGK[14 - k]
            };
            return Err(Error::NonFinite { x });
        }
    }

    let mut res_k = WGK[7] * fc;
    let mut res_g = WG[3] * fc;
    let mut res_abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let s = fv[j] + fv[14 - j];
        res_k += WGK[j] * s;
        res_abs += WGK[j] * (fv[j].abs() + fv[14 - j].abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * s;
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let scale = half.abs();
    let value = res_k * half;
    let res_abs = res_abs * scale;
    let res_asc = res_asc * scale;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    Ok(Panel {
        a,
        b,
        value,
        err,
        carried: carried * scale,
        floor,
        depth,
    })
}

/// Integrates `f` over the consecutive pieces delimited by `breaks`
/// (sorted, at least two entries). The integrand returns `(value, err)`,
/// where `err` is an absolute error density that is integrated alongside and
/// added to the final estimate (used for nested integrals).
pub fn integrate_carrying<F>(mut f: F, breaks: &[f64], tol: Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if breaks.len() < 2 {
        return Err(Error::invalid("need at least two break points"));
    }
    let lo = breaks[0];
    let hi = breaks[breaks.len() - 1];
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid(format!(
            "bad integration range [{lo}, {hi}]"
        )));
    }
    let mut evals = 0usize;
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] < w[0] {
            return Err(Error::invalid("break points must be sorted"));
        }
        if w[1] > w[0] {
            heap.push(kronrod(&mut f, w[0], w[1], 0)?);
            evals += 15;
        }
    }
    let mut settled: Vec<Panel> = Vec::new();

    loop {
        let (value, err) = heap
            .iter()
            .chain(settled.iter())
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
        let target = tol.abs.max(tol.rel * value.abs());
        if err <= target {
            break;
        }
        let Some(worst) = heap.pop() else {
            // Everything left is at round-off level.
            break;
        };
        if worst.at_roundoff() {
            settled.push(worst);
            continue;
        }
        if worst.depth >= tol.max_depth || heap.len() + settled.len() >= MAX_PANELS {
            return Err(Error::Integration {
                lo,
                hi,
                value,
                err_estimate: err,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            settled.push(worst);
            continue;
        }
        heap.push(kronrod(&mut f, worst.a, mid, worst.depth + 1)?);
        heap.push(kronrod(&mut f, mid, worst.b, worst.depth + 1)?);
        evals += 30;
    }

    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(settled);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let err = panels.iter().map(|p| p.err + p.carried).sum();
    Ok(Integral { value, err, evals })
}

/// Integrates a plain integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    integrate_carrying(|x| Ok((f(x), 0.0)), &[a, b], tol)
}

/// Integrates a plain integrand over `[a, b]`, splitting at the interior
/// points of `breaks` that fall strictly inside the range.
pub fn integrate_split<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    let pts = break_points(a, b, breaks);
    integrate_carrying(|x| Ok((f(x), 0.0)), &pts, tol)
}

/// `[a, interior breaks..., b]`, sorted and de-duplicated.
pub fn break_points(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    pts.push(a);
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact_on_one_panel() {
        let r = integrate(
            |x| x.powi(6) - 2.0 * x,
            0.0,
            2.0,
            Tolerance::relative(1e-12),
        )
        .unwrap();
        assert_relative_eq!(r.value, 128.0 / 7.0 - 4.0, max_relative = 1e-14);
        assert_eq!(r.evals, 15);
    }

    #[test]
    fn smooth_peaked_integrand() {
        let r = integrate(|x| (-x * x).exp(), -10.0, 10.0, Tolerance::relative(1e-12)).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        assert!(r.err < 1e-11);
    }

    #[test]
    fn kinks_are_resolved_by_bisection() {
        let r = integrate(
            |x: f64| (x - 0.3).abs(),
            -1.0,
            1.0,
            Tolerance::relative(1e-10),
        )
        .unwrap();
        assert_relative_eq!(
            r.value,
            (1.3f64.powi(2) + 0.7f64.powi(2)) / 2.0,
            max_relative = 1e-10
        );
        let split = integrate_split(
            |x: f64| (x - 0.3).abs(),
            -1.0,
            1.0,
            &[0.3],
            Tolerance::relative(1e-10),
        )
        .unwrap();
        assert!(split.evals <= 30);
    }

    #[test]
    fn empty_range_is_zero() {
        let r = integrate(|x| x, 1.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let e = integrate(
            |x| if x > 0.5 { f64::NAN } else { x },
            0.0,
            1.0,
            Tolerance::relative(1e-8),
        )
        .unwrap_err();
        assert!(matches!(e, Error::NonFinite { .. }));
    }

    #[test]
    fn depth_budget_exhaustion_carries_estimate() {
        let tol = Tolerance {
            rel: 1e-14,
            abs: 0.0,
            max_depth: 2,
        };
        let e = integrate(|x: f64| x.abs().sqrt().recip().min(1e8), -1.0, 1.0, tol).unwrap_err();
        match e {
            Error::Integration {
                value,
                err_estimate,
                ..
            } => {
                assert!(value > 0.0 && err_estimate > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn carried_error_is_added() {
        let r = integrate_carrying(|_| Ok((1.0, 1e-6)), &[0.0, 2.0], Tolerance::relative(1e-10))
            .unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-15);
        assert!((r.err - 2e-6).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadSpec::default().validate().is_ok());
        let bad = QuadSpec {
            rel_tol: 1e-3,
            ..QuadSpec::default()
        };
        assert!(bad.validate().is_err());
        let mc = QuadSpec {
            ekl_method: EklMethod::MonteCarlo,
            mc_draws: 10,
            ..QuadSpec::default()
        };
        assert!(mc.validate().is_err());
    }
}
