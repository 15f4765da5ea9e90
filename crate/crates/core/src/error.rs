//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: max |A - A^T| = {max_dev:.3e} exceeds {tol:.0e}")]
    NotSymmetric { max_dev: f64, tol: f64 },

    #[error("columns are not orthonormal: max |H^T H - I| = {max_dev:.3e} exceeds {tol:.0e}")]
    NotOrthonormal { max_dev: f64, tol: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Validation failure of a named configuration or spec field.
    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error("Bingham sampler stalled: {proposals} consecutive proposals rejected in one column draw")]
    SamplerStall { proposals: u64 },

    #[error("malformed file {path}: {detail}")]
    MalformedFile { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Distinguishes bad input (configs, files, arguments) from numerical
    /// failures. The CLI maps the former to exit code 1 and the latter to 2.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::SamplerStall { .. } | Error::NotOrthonormal { .. } | Error::NotSymmetric { .. }
        )
    }

    pub(crate) fn field(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
