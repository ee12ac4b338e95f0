use thiserror::Error;

/// Errors raised by the model, the statistics routines and the data loaders.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad ranges, inconsistent windows, unknown keys).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated a function precondition (length mismatch, empty input).
    #[error("contract error: {0}")]
    Contract(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Singular or otherwise ill-conditioned numerical problem.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A statistic is undefined for the given input (e.g. correlation of a
    /// constant series).
    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
