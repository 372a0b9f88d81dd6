use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("integration did not converge: estimate {estimate} with error {error}")]
    Integration { estimate: f64, error: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("residual interference is not monotone on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("no boundary for the layering found: {0}")]
    Boundary(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

impl Error {
    /// Configuration errors are caller mistakes; everything else is a
    /// numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownStrategy(_) | Error::Domain { .. }
        )
    }
}
