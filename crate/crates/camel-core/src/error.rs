//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown preset, invalid range spec, missing gesture model.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violated an operation precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Fitting a statistical model failed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Weight transfer between incompatible network shapes.
    #[error("transfer error: {0}")]
    Transfer(String),

    /// Training produced a non-finite value.
    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    /// The feedback ladder was rejected at its first rung.
    #[error("no ladder value acceptable: {0}")]
    NoneAcceptable(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
