use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the inference engine and its loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("range error at row {row}: {message}")]
    Range { row: usize, message: String },

    #[error("inconsistent counts in observation {observation}: {message}")]
    InconsistentCounts { observation: usize, message: String },

    #[error("no urban-proportion offset for country `{country}` in year {year}")]
    MissingOffset { country: String, year: i32 },

    #[error("urban-proportion series missing for countries: {}", .0.join(", "))]
    MissingUrbanSeries(Vec<String>),

    #[error("unknown country `{0}`")]
    UnknownCountry(String),

    #[error("unknown parameter block: {0}")]
    UnknownBlock(String),

    #[error("spline basis error: {0}")]
    Basis(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "non-finite log posterior at initialisation after {attempts} attempts (chain {chain})"
    )]
    NonFiniteInit { chain: usize, attempts: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
