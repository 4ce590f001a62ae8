use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A scheme configuration violates one of the validity predicates of the
    /// convergence results (e.g. `T > h^{1/2} violated`).
    #[error("configuration rejected: {0}")]
    Config(String),

    /// A subordinator path never crossed the requested level.
    #[error("subordinator path exhausted at {last:.6e} before crossing level {level:.6e}")]
    InsufficientPath { level: f64, last: f64 },

    /// A numerical routine failed to reach its tolerance or produced
    /// non-finite values.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },

    /// Evaluation at a singular point of an envelope or density.
    #[error("singular evaluation: {0}")]
    Singularity(String),

    /// A request would exceed a hard resource limit.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::param("beta", format!("{beta} not in (0,1)")))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in (0,2]")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{value} must be positive and finite")))
    }
}
