use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by operator construction, the proximal maps, the solver and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing parameter `{parameter}` for preset {preset}")]
    MissingParameter {
        preset: &'static str,
        parameter: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("invalid group structure: {0}")]
    InvalidGroups(String),

    #[error("cross-validation fold {fold}: no grid point produced a converged solve")]
    FoldFailed { fold: usize },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(
    context: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
