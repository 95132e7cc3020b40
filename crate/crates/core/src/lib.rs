//! Score-driven parameter updates and the Kullback-Leibler criteria used to
//! judge them: trimmed and censored (localized around the observation) and
//! expected (averaged over the observation that drives the update).
//!
//! The crate is organised bottom-up:
//!
//! * [`quad`] adaptive Gauss-Kronrod integration with error estimates,
//! * [`density`] parametric density families with scores and curvatures,
//! * [`rules`] updating rules and their score-equivalence diagnostics,
//! * [`divergence`] the divergence measures, their update differences and
//!   the learning-rate bounds,
//! * [`lab`] numerical checks of the sign characterisations built on top.
//!
//! Everything is a pure function of its inputs, so scenarios can be evaluated
//! from many threads at once.

pub mod density;
pub mod divergence;
pub mod error;
pub mod lab;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod quad;
pub mod rules;
mod sign;
mod special;

pub use density::{DensityAt, EvalBundle, Family, Interval, ParamDensity};
pub use divergence::{
    Ball, DivergenceReport, LearningRateBounds, LocalizedDeltas, Method, ScoringRules,
};
pub use error::{Error, Result};
pub use quad::{EklMethod, QuadSpec};
pub use rules::{Branch, Equivalence, MomentSummary, Prediction, RuleKind, UpdateRule};
pub use sign::Sign;

/// Absolute tolerance used to resolve the sign of products of moments.
pub const SIGN_EPS: f64 = 1e-9;

/// Half-width of the band around `p(y_t) = f(y_t)` inside which localized
/// checks make no claim.
pub const BOUNDARY_BAND: f64 = 1e-3;
