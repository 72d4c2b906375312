use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite value while computing {context}")]
    NonFinite { context: &'static str },

    #[error("quadrature integrand is not finite at s = {at}")]
    Quadrature { at: f64 },

    #[error("{what} = {value} is outside the support")]
    Domain { what: &'static str, value: f64 },

    #[error("degenerate covariance: 1 - rho^2 = {one_minus_rho2:e}")]
    DegenerateCovariance { one_minus_rho2: f64 },

    #[error("path {path} produced a non-finite {quantity} contribution (N_T = {n_jumps})")]
    NonFinitePath {
        path: u64,
        quantity: &'static str,
        n_jumps: usize,
    },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn finite(value: f64, context: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { context })
    }
}
