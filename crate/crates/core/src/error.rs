//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Array or layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A CSV file does not match its schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A loss, gradient, or ELBO term became NaN or infinite.
    #[error("non-finite {quantity} in {context}")]
    NonFinite { quantity: String, context: String },

    /// Metric undefined for the given inputs (e.g. AUROC with one class).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// Inputs too degenerate to produce a meaningful report.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn non_finite(quantity: impl Into<String>, context: impl Into<String>) -> Self {
        Error::NonFinite {
            quantity: quantity.into(),
            context: context.into(),
        }
    }
}
