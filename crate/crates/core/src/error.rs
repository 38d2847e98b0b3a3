use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is malformed or inconsistent (unsorted streams, bad files).
    #[error("data error: {0}")]
    Data(String),

    /// The data carries no usable signal for the requested analysis.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("no cavity dip found: {0}")]
    NoDip(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
