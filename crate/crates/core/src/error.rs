use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel is not even: asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotEven { asymmetry: f64, tolerance: f64 },

    #[error("spectral truncation K_max = {k_max} must stay below N/2 = {half}")]
    Aliasing { k_max: usize, half: usize },

    #[error("tail of the kernel spectrum beyond K_max = {k_max} is not dominated by the extremum")]
    TruncationTooShort { k_max: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("exponent {max_exponent:e} would overflow exp()")]
    ExponentOverflow { max_exponent: f64 },

    #[error("density not positive at node {index}: {value:e}")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("positivity breached at t = {time}: min u = {min:e}")]
    PositivityBreach { time: f64, min: f64 },

    #[error("free energy increased at t = {time}: {before} -> {after}")]
    EnergyIncrease { time: f64, before: f64, after: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error in [{section}] {key}: {message}")]
    Config {
        section: String,
        key: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(section: &str, key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            section: section.to_string(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
