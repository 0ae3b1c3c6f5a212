use thiserror::Error;

/// Errors raised by the physics calculators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),

    #[error("empty ensemble: atom count must be at least 1")]
    EmptyEnsemble,

    #[error("error never reaches the threshold {threshold:e} for tau in (0, {tau_cap:e}] s")]
    NonBracketable { threshold: f64, tau_cap: f64 },

    #[error("bisection did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("scaling fit slice contains flagged point at size {0}")]
    FlaggedPoint(u64),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Fails with `NonFinite` unless `value` is finite.
pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}

/// Fails unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {value}")))
    }
}
