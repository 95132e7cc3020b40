//! Parametric density families with a scalar time-varying parameter.
//!
//! Every family lives on the real line and supplies its log-density, score
//! `d/dθ log f(y|θ)`, curvature `d²/dθ² log f(y|θ)`, and both tails of its
//! cumulative distribution in closed form. The parameter enters with an
//! identity link: a location for `gaussian_location`, `gaussian_mixture2`
//! and `piecewise_test`, a variance for `gaussian_scale` and
//! `student_t_scale`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::special::{log_add_exp, norm_cdf, norm_log_pdf, norm_mass, norm_pdf, norm_sf};

/// Closed interval `[lo, hi]`; infinite endpoints are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Interval> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.lo >= other.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// The implemented families and their fixed shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `N(θ, sigma²)`.
    GaussianLocation {
        #[serde(default = "one")]
        sigma: f64,
    },
    /// `N(mean, θ)`.
    GaussianScale {
        #[serde(default)]
        mean: f64,
    },
    /// Student-t with `nu` degrees of freedom, centred at zero, variance `θ`.
    #[serde(rename = "student_t_scale")]
    StudentTScale { nu: f64 },
    /// `weight·N(mean1 + θ, sd1²) + (1 − weight)·N(mean2 + θ, sd2²)`.
    #[serde(rename = "gaussian_mixture2")]
    GaussianMixture2 {
        weight: f64,
        mean1: f64,
        sd1: f64,
        mean2: f64,
        sd2: f64,
    },
    /// Unit-variance normal around θ on the window `[lo, hi]`; outside the
    /// window the same total mass is spread like `N(θ, outer_scale²)`.
    ///
    /// Two members that differ only in `outer_scale` coincide on the window
    /// and give equal mass to its complement.
    PiecewiseTest { lo: f64, hi: f64, outer_scale: f64 },
}

impl Family {
    pub fn id(&self) -> &'static str {
        match self {
            Family::GaussianLocation { .. } => "gaussian_location",
            Family::GaussianScale { .. } => "gaussian_scale",
            Family::StudentTScale { .. } => "student_t_scale",
            Family::GaussianMixture2 { .. } => "gaussian_mixture2",
            Family::PiecewiseTest { .. } => "piecewise_test",
        }
    }

    pub fn default_theta_domain(&self) -> Interval {
        match self {
            Family::GaussianScale { .. } | Family::StudentTScale { .. } => Interval::POSITIVE,
            _ => Interval::REAL,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Family::GaussianLocation { sigma } => sigma > 0.0 && sigma.is_finite(),
            Family::GaussianScale { mean } => mean.is_finite(),
            Family::StudentTScale { nu } => nu > 2.0 && nu.is_finite(),
            Family::GaussianMixture2 {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                weight > 0.0
                    && weight < 1.0
                    && mean1.is_finite()
                    && mean2.is_finite()
                    && sd1 > 0.0
                    && sd2 > 0.0
                    && sd1.is_finite()
                    && sd2.is_finite()
            }
            Family::PiecewiseTest {
                lo,
                hi,
                outer_scale,
            } => {
                lo.is_finite()
                    && hi.is_finite()
                    && lo < hi
                    && outer_scale > 0.0
                    && outer_scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid shape parameters for {self:?}"
            )))
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Family id with default shape parameters, as used by configuration files.
impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        match s {
            "gaussian_location" => Ok(Family::GaussianLocation { sigma: 1.0 }),
            "gaussian_scale" => Ok(Family::GaussianScale { mean: 0.0 }),
            "student_t_scale" => Ok(Family::StudentTScale { nu: 5.0 }),
            "gaussian_mixture2" => Ok(Family::GaussianMixture2 {
                weight: 0.5,
                mean1: -1.0,
                sd1: 1.0,
                mean2: 1.0,
                sd2: 1.0,
            }),
            "piecewise_test" => Ok(Family::PiecewiseTest {
                lo: -1.0,
                hi: 1.0,
                outer_scale: 1.0,
            }),
            other => Err(Error::invalid(format!("unknown family id {other:?}"))),
        }
    }
}

/// Log-density value with its first two parameter derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalBundle {
    pub pdf_value: f64,
    pub log_pdf: f64,
    pub score: f64,
    pub hessian: f64,
}

fn one() -> f64 {
    1.0
}

/// Serialized form of [`ParamDensity`]: the family fields, plus an optional
/// `theta_domain` box that defaults to the family's natural range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DensitySpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_domain: Option<Interval>,
}

impl TryFrom<DensitySpec> for ParamDensity {
    type Error = Error;

    fn try_from(spec: DensitySpec) -> Result<ParamDensity> {
        let d = ParamDensity::new(spec.family)?;
        match spec.theta_domain {
            Some(dom) => d.with_theta_domain(dom),
            None => Ok(d),
        }
    }
}

impl From<ParamDensity> for DensitySpec {
    fn from(d: ParamDensity) -> DensitySpec {
        let natural = d.family.default_theta_domain();
        DensitySpec {
            family: d.family,
            theta_domain: (d.theta_domain != natural).then_some(d.theta_domain),
        }
    }
}

/// A density family together with its admissible parameter set Θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensitySpec", into = "DensitySpec")]
pub struct ParamDensity {
    pub family: Family,
    pub theta_domain: Interval,
}

impl ParamDensity {
    pub fn new(family: Family) -> Result<ParamDensity> {
        family.validate()?;
        Ok(ParamDensity {
            family,
            theta_domain: family.default_theta_domain(),
        })
    }

    /// Restricts Θ to `domain`, which must lie inside the family's natural range.
    pub fn with_theta_domain(mut self, domain: Interval) -> Result<ParamDensity> {
        if !domain.is_subset_of(&self.family.default_theta_domain()) {
            return Err(Error::invalid(format!(
                "Θ = [{}, {}] exceeds the natural range of {}",
                domain.lo, domain.hi, self.family
            )));
        }
        self.theta_domain = domain;
        Ok(self)
    }

    pub fn gaussian_location(sigma: f64) -> Result<ParamDensity> {
        ParamDensity::new(Family::GaussianLocation { sigma })
    }

    pub fn gaussian_scale() -> ParamDensity {
        ParamDensity {
            family: Family::GaussianScale { mean: 0.0 },
            theta_domain: Interval::POSITIVE,
        }
    }

    pub fn student_t_scale(nu: f64) -> Result<ParamDensity> {
        ParamDensity::new(Family::StudentTScale { nu })
    }

    pub fn outcome_domain(&self) -> Interval {
        Interval::REAL
    }

    pub fn at(&self, theta: f64) -> DensityAt {
        DensityAt {
            density: *self,
            theta,
        }
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if self.theta_domain.contains_interior(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "theta",
                value: theta,
                lo: self.theta_domain.lo,
                hi: self.theta_domain.hi,
            })
        }
    }

    pub fn check_outcome(&self, y: f64) -> Result<()> {
        let d = self.outcome_domain();
        if y.is_finite() && d.contains(y) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "y",
                value: y,
                lo: d.lo,
                hi: d.hi,
            })
        }
    }

    /// Density, log-density, score and curvature at `(y, θ)`.
    pub fn evaluate(&self, y: f64, theta: f64) -> Result<EvalBundle> {
        self.check_outcome(y)?;
        self.check_theta(theta)?;
        let log_pdf = self.log_pdf(y, theta);
        Ok(EvalBundle {
            pdf_value: log_pdf.exp(),
            log_pdf,
            score: self.score(y, theta),
            hessian: self.hessian(y, theta),
        })
    }

    // The unchecked evaluators below assume `y` finite and `θ ∈ Int(Θ)`.

    pub fn log_pdf(&self, y: f64, theta: f64) -> f64 {
        match self.family {
            Family::GaussianLocation { sigma } => norm_log_pdf((y - theta) / sigma) - sigma.ln(),
            Family::GaussianScale { mean } => {
                let d = y - mean;
                -0.5 * (d * d / theta) - 0.5 * theta.ln() - crate::special::LN_SQRT_2PI
            }
            Family::StudentTScale { nu } => {
                let k = nu - 2.0;
                student_log_norm(nu)
                    - 0.5 * theta.ln()
                    - 0.5 * (nu + 1.0) * (y * y / (k * theta)).ln_1p()
            }
            Family::GaussianMixture2 {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                let l1 = weight.ln() + norm_log_pdf((y - mean1 - theta) / sd1) - sd1.ln();
                let l2 = (-weight).ln_1p() + norm_log_pdf((y - mean2 - theta) / sd2) - sd2.ln();
                log_add_exp(l1, l2)
            }
            Family::PiecewiseTest {
                lo,
                hi,
                outer_scale,
            } => {
                if y >= lo && y <= hi {
                    norm_log_pdf(y - theta)
                } else {
                    let pw = Piecewise::new(lo, hi, outer_scale, theta);
                    pw.outer_mass.ln() - pw.outer_ref.ln() + norm_log_pdf((y - theta) / outer_scale)
                        - outer_scale.ln()
                }
            }
        }
    }

    pub fn pdf(&self, y: f64, theta: f64) -> f64 {
        self.log_pdf(y, theta).exp()
    }

    pub fn score(&self, y: f64, theta: f64) -> f64 {
        match self.family {
            Family::GaussianLocation { sigma } => (y - theta) / (sigma * sigma),
            Family::GaussianScale { mean } => {
                let d = y - mean;
                (d * d - theta) / (2.0 * theta * theta)
            }
            Family::StudentTScale { nu } => {
                let k = nu - 2.0;
                let y2 = y * y;
                -0.5 / theta + 0.5 * (nu + 1.0) * y2 / (theta * (k * theta + y2))
            }
            Family::GaussianMixture2 { .. } => {
                let (r1, r2, u1, u2, _, _) = self.mixture_parts(y, theta);
                r1 * u1 + r2 * u2
            }
            Family::PiecewiseTest {
                lo,
                hi,
                outer_scale,
            } => {
                if y >= lo && y <= hi {
                    y - theta
                } else {
                    let pw = Piecewise::new(lo, hi, outer_scale, theta);
                    pw.d_log_mass - pw.d_log_ref + (y - theta) / (outer_scale * outer_scale)
                }
            }
        }
    }

    pub fn hessian(&self, y: f64, theta: f64) -> f64 {
        match self.family {
            Family::GaussianLocation { sigma } => -1.0 / (sigma * sigma),
            Family::GaussianScale { mean } => {
                let d = y - mean;
                0.5 / (theta * theta) - d * d / (theta * theta * theta)
            }
            Family::StudentTScale { nu } => {
                let k = nu - 2.0;
                let y2 = y * y;
                let q = k * theta + y2;
                0.5 / (theta * theta)
                    - 0.5 * (nu + 1.0) * y2 * (2.0 * k * theta + y2) / (theta * theta * q * q)
            }
            Family::GaussianMixture2 { .. } => {
                let (r1, r2, u1, u2, p1, p2) = self.mixture_parts(y, theta);
                let s = r1 * u1 + r2 * u2;
                r1 * (u1 * u1 - p1) + r2 * (u2 * u2 - p2) - s * s
            }
            Family::PiecewiseTest {
                lo,
                hi,
                outer_scale,
            } => {
                if y >= lo && y <= hi {
                    -1.0
                } else {
                    let pw = Piecewise::new(lo, hi, outer_scale, theta);
                    pw.d2_log_mass - pw.d2_log_ref - 1.0 / (outer_scale * outer_scale)
                }
            }
        }
    }

    /// Responsibilities, per-component scores and precisions of the mixture.
    fn mixture_parts(&self, y: f64, theta: f64) -> (f64, f64, f64, f64, f64, f64) {
        let Family::GaussianMixture2 {
            weight,
            mean1,
            sd1,
            mean2,
            sd2,
        } = self.family
        else {
            unreachable!("mixture_parts on a non-mixture family")
        };
        let l1 = weight.ln() + norm_log_pdf((y - mean1 - theta) / sd1) - sd1.ln();
        let l2 = (-weight).ln_1p() + norm_log_pdf((y - mean2 - theta) / sd2) - sd2.ln();
        let total = log_add_exp(l1, l2);
        let r1 = (l1 - total).exp();
        let r2 = (l2 - total).exp();
        let p1 = 1.0 / (sd1 * sd1);
        let p2 = 1.0 / (sd2 * sd2);
        (
            r1,
            r2,
            (y - mean1 - theta) * p1,
            (y - mean2 - theta) * p2,
            p1,
            p2,
        )
    }

    /// `P(Y <= y)`.
    pub fn cdf(&self, y: f64, theta: f64) -> f64 {
        match self.family {
            Family::GaussianLocation { sigma } => norm_cdf((y - theta) / sigma),
            Family::GaussianScale { mean } => norm_cdf((y - mean) / theta.sqrt()),
            Family::StudentTScale { nu } => {
                let t = y / student_scale(nu, theta);
                let tail = student_tail(nu, t.abs());
                if t < 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
            Family::GaussianMixture2 {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                weight * norm_cdf((y - mean1 - theta) / sd1)
                    + (1.0 - weight) * norm_cdf((y - mean2 - theta) / sd2)
            }
            Family::PiecewiseTest {
                lo,
                hi,
                outer_scale,
            } => {
                let pw = Piecewise::new(lo, hi, outer_scale, theta);
                if y < lo {
                    pw.outer_mass * norm_cdf((y - theta) / outer_scale) / pw.outer_ref
                } else if y <= hi {
                    pw.left_mass() + norm_mass(lo - theta, y - theta)
                } else {
                    1.0 - self.sf(y, theta)
                }
            }
        }
    }

    /// `P(Y > y)`.
    pub fn sf(&self, y: f64, theta: f64) -> f64 {
        match self.family {
            Family::GaussianLocation { sigma } => norm_sf((y - theta) / sigma),
            Family::GaussianScale { mean } => norm_sf((y - mean) / theta.sqrt()),
            Family::StudentTScale { nu } => {
                let t = y / student_scale(nu, theta);
                let tail = student_tail(nu, t.abs());
                if t > 0.0 {
                    tail
                } else {
                    1.0 - tail
                }
            }
            Family::GaussianMixture2 {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                weight * norm_sf((y - mean1 - theta) / sd1)
                    + (1.0 - weight) * norm_sf((y - mean2 - theta) / sd2)
            }
            Family::PiecewiseTest {
                lo,
                hi,
                outer_scale,
            } => {
                let pw = Piecewise::new(lo, hi, outer_scale, theta);
                if y > hi {
                    pw.outer_mass * norm_sf((y - theta) / outer_scale) / pw.outer_ref
                } else if y >= lo {
                    pw.right_mass() + norm_mass(y - theta, hi - theta)
                } else {
                    1.0 - self.cdf(y, theta)
                }
            }
        }
    }

    /// Probability of `[a, b]` from the closed-form cumulative functions.
    pub fn mass_on(&self, a: f64, b: f64, theta: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::invalid(format!(
                "mass_on needs a <= b, got [{a}, {b}]"
            )));
        }
        self.check_theta(theta)?;
        if a == b {
            return Ok(0.0);
        }
        // Take the difference in whichever tail keeps both terms small.
        let lower = self.cdf(b, theta) - self.cdf(a, theta);
        let upper = self.sf(a, theta) - self.sf(b, theta);
        let m = if self.cdf(a, theta) < 0.5 && self.cdf(b, theta) < 0.5 {
            lower
        } else if self.sf(a, theta) < 0.5 && self.sf(b, theta) < 0.5 {
            upper
        } else {
            1.0 - self.cdf(a, theta) - self.sf(b, theta)
        };
        Ok(m.max(0.0))
    }

    /// Probability of the complement of `[a, b]`.
    pub fn mass_outside(&self, a: f64, b: f64, theta: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::invalid(format!(
                "mass_outside needs a <= b, got [{a}, {b}]"
            )));
        }
        self.check_theta(theta)?;
        Ok(self.cdf(a, theta) + self.sf(b, theta))
    }

    /// Probability of `[a, b]` by adaptive quadrature of the density; the
    /// reference route for the closed-form [`ParamDensity::mass_on`].
    pub fn mass_by_quadrature(&self, a: f64, b: f64, theta: f64, tol: Tolerance) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::invalid(format!("mass needs a <= b, got [{a}, {b}]")));
        }
        self.check_theta(theta)?;
        let r = quad::integrate_split(|x| self.pdf(x, theta), a, b, &self.breakpoints(), tol)?;
        Ok(r.value)
    }

    /// Points where the density is not smooth in `y`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            Family::PiecewiseTest { lo, hi, .. } => vec![lo, hi],
            _ => Vec::new(),
        }
    }

    /// A central point and a spread, used to bracket quantiles.
    fn center_spread(&self, theta: f64) -> (f64, f64) {
        match self.family {
            Family::GaussianLocation { sigma } => (theta, sigma),
            Family::GaussianScale { mean } => (mean, theta.sqrt()),
            Family::StudentTScale { .. } => (0.0, theta.sqrt()),
            Family::GaussianMixture2 {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => (
                theta + weight * mean1 + (1.0 - weight) * mean2,
                sd1.max(sd2) + (mean1 - mean2).abs(),
            ),
            Family::PiecewiseTest { outer_scale, .. } => (theta, outer_scale.max(1.0)),
        }
    }

    /// Largest `x` (to bisection precision) with `P(Y <= x) <= p`.
    pub fn lower_quantile(&self, theta: f64, p: f64) -> f64 {
        let (c, s) = self.center_spread(theta);
        let mut hi = c;
        while self.cdf(hi, theta) <= p {
            hi += s;
        }
        let mut step = s;
        let mut lo = hi - step;
        while self.cdf(lo, theta) > p {
            step *= 2.0;
            lo = hi - step;
        }
        bisect(lo, hi, |x| self.cdf(x, theta) <= p).0
    }

    /// Smallest `x` (to bisection precision) with `P(Y > x) <= p`.
    pub fn upper_quantile(&self, theta: f64, p: f64) -> f64 {
        let (c, s) = self.center_spread(theta);
        let mut lo = c;
        while self.sf(lo, theta) <= p {
            lo -= s;
        }
        let mut step = s;
        let mut hi = lo + step;
        while self.sf(hi, theta) > p {
            step *= 2.0;
            hi = lo + step;
        }
        bisect(lo, hi, |x| self.sf(x, theta) > p).1
    }

    /// Finite integration window `[L, U]` leaving at most `tail_mass` in each tail.
    pub fn truncation_bounds(&self, theta: f64, tail_mass: f64) -> Result<Interval> {
        if !(tail_mass > 0.0 && tail_mass < 1e-3) {
            return Err(Error::invalid(format!(
                "tail_mass {tail_mass} not in (0, 1e-3)"
            )));
        }
        self.check_theta(theta)?;
        Ok(Interval {
            lo: self.lower_quantile(theta, tail_mass),
            hi: self.upper_quantile(theta, tail_mass),
        })
    }

    /// Grid estimate of `sup |d²/dθ² log f(y|θ)|` over the two boxes.
    ///
    /// This is the curvature constant `c` of the learning-rate bounds; it is
    /// the maximum over a `grid_n × grid_n` lattice, not a certified supremum.
    pub fn hessian_bound(
        &self,
        theta_box: Interval,
        y_box: Interval,
        grid_n: usize,
    ) -> Result<f64> {
        if grid_n < 101 {
            return Err(Error::invalid(format!("grid_n {grid_n} below 101")));
        }
        let finite = |i: &Interval| i.lo.is_finite() && i.hi.is_finite();
        if !finite(&theta_box) || !finite(&y_box) {
            return Err(Error::invalid("hessian_bound needs bounded boxes"));
        }
        let natural = self.family.default_theta_domain();
        if !theta_box.is_subset_of(&self.theta_domain) || !natural.contains_interior(theta_box.lo) {
            return Err(Error::invalid("theta box must lie inside Θ"));
        }
        let mut c: f64 = 0.0;
        for i in 0..grid_n {
            let th = lattice(theta_box, i, grid_n);
            for j in 0..grid_n {
                let y = lattice(y_box, j, grid_n);
                c = c.max(self.hessian(y, th).abs());
            }
        }
        Ok(c)
    }

    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> f64 {
        match self.family {
            Family::GaussianLocation { sigma } => {
                Normal::new(theta, sigma).expect("valid normal").sample(rng)
            }
            Family::GaussianScale { mean } => Normal::new(mean, theta.sqrt())
                .expect("valid normal")
                .sample(rng),
            Family::StudentTScale { nu } => {
                student_scale(nu, theta) * StudentT::new(nu).expect("valid t").sample(rng)
            }
            Family::GaussianMixture2 {
                weight,
                mean1,
                sd1,
                mean2,
                sd2,
            } => {
                let (m, s) = if rng.random::<f64>() < weight {
                    (mean1, sd1)
                } else {
                    (mean2, sd2)
                };
                Normal::new(m + theta, s).expect("valid normal").sample(rng)
            }
            Family::PiecewiseTest { .. } => {
                let u: f64 = rng.random();
                if u < 0.5 {
                    self.lower_quantile(theta, u)
                } else {
                    self.upper_quantile(theta, 1.0 - u)
                }
            }
        }
    }
}

fn lattice(iv: Interval, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        iv.hi
    } else {
        iv.lo + iv.width() * (i as f64) / ((n - 1) as f64)
    }
}

/// Bisects `[lo, hi]` where `pred(lo)` holds and `pred(hi)` does not,
/// returning the final bracket.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> (f64, f64) {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

fn student_log_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln()
}

fn student_scale(nu: f64, variance: f64) -> f64 {
    (variance * (nu - 2.0) / nu).sqrt()
}

/// `P(T > t)` for a standard Student-t and `t >= 0`.
fn student_tail(nu: f64, t: f64) -> f64 {
    0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t * t))
}

/// Mass bookkeeping of the piecewise test density at a given θ.
struct Piecewise {
    lo: f64,
    hi: f64,
    theta: f64,
    s: f64,
    /// Mass of the unit normal outside the window.
    outer_mass: f64,
    /// Mass of `N(θ, s²)` outside the window.
    outer_ref: f64,
    d_log_mass: f64,
    d2_log_mass: f64,
    d_log_ref: f64,
    d2_log_ref: f64,
}

impl Piecewise {
    fn new(lo: f64, hi: f64, s: f64, theta: f64) -> Piecewise {
        let a = lo - theta;
        let b = hi - theta;
        let m = norm_cdf(a) + norm_sf(b);
        let dm = norm_pdf(b) - norm_pdf(a);
        let d2m = b * norm_pdf(b) - a * norm_pdf(a);
        let (za, zb) = (a / s, b / s);
        let r = norm_cdf(za) + norm_sf(zb);
        let dr = (norm_pdf(zb) - norm_pdf(za)) / s;
        let d2r = (zb * norm_pdf(zb) - za * norm_pdf(za)) / (s * s);
        Piecewise {
            lo,
            hi,
            theta,
            s,
            outer_mass: m,
            outer_ref: r,
            d_log_mass: dm / m,
            d2_log_mass: d2m / m - (dm / m) * (dm / m),
            d_log_ref: dr / r,
            d2_log_ref: d2r / r - (dr / r) * (dr / r),
        }
    }

    fn left_mass(&self) -> f64 {
        self.outer_mass * norm_cdf((self.lo - self.theta) / self.s) / self.outer_ref
    }

    fn right_mass(&self) -> f64 {
        self.outer_mass * norm_sf((self.hi - self.theta) / self.s) / self.outer_ref
    }
}

/// A density pinned at a parameter value, e.g. the truth `p(·|λ)` or the
/// predicted model density `f(·|θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityAt {
    pub density: ParamDensity,
    pub theta: f64,
}

impl DensityAt {
    pub fn new(density: ParamDensity, theta: f64) -> Result<DensityAt> {
        density.check_theta(theta)?;
        Ok(DensityAt { density, theta })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.density.pdf(y, self.theta)
    }

    pub fn log_pdf(&self, y: f64) -> f64 {
        self.density.log_pdf(y, self.theta)
    }

    pub fn mass_on(&self, a: f64, b: f64) -> Result<f64> {
        self.density.mass_on(a, b, self.theta)
    }

    pub fn mass_outside(&self, a: f64, b: f64) -> Result<f64> {
        self.density.mass_outside(a, b, self.theta)
    }

    pub fn truncation_bounds(&self, tail_mass: f64) -> Result<Interval> {
        self.density.truncation_bounds(self.theta, tail_mass)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.density.breakpoints()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.density.sample(self.theta, rng)
    }

    /// Mean and variance when the density is Gaussian.
    pub fn gaussian_moments(&self) -> Option<(f64, f64)> {
        match self.density.family {
            Family::GaussianLocation { sigma } => Some((self.theta, sigma * sigma)),
            Family::GaussianScale { mean } => Some((mean, self.theta)),
            _ => None,
        }
    }
}
