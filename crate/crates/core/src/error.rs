use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} lies outside its domain ({lo}, {hi})")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The adaptive integrator ran out of budget before meeting its tolerance.
    #[error("integration did not converge on [{lo}, {hi}]: value {value}, error estimate {err_estimate}")]
    Integration {
        lo: f64,
        hi: f64,
        value: f64,
        err_estimate: f64,
    },

    #[error("non-finite integrand at x = {x}")]
    NonFinite { x: f64 },

    /// A nested integral failed; `node` is the outer abscissa of the worst inner failure.
    #[error("inner integral failed at outer node y = {node}: {source}")]
    Nested { node: f64, source: Box<Error> },

    #[error("degenerate localization: mass outside the ball is {truth_mass:e} (truth) and {model_mass:e} (model)")]
    DegenerateLocalization { truth_mass: f64, model_mass: f64 },

    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),

    #[error("objective is not bracketed by [{lo}, {hi}]: optimum at the boundary {at}")]
    NonBracketing { lo: f64, hi: f64, at: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
