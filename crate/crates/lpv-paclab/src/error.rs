use thiserror::Error;

/// Library-wide error type.
///
/// The CLI maps variants onto exit codes: configuration and parse errors
/// exit with 2, numerical failures with 3, assertion failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (bad dimensions, domains, ranges).
    #[error("config error: {0}")]
    Config(String),

    /// Mathematical domain violation (empty signal, argument out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed persisted data; the message names the offending row/column.
    #[error("parse error: {0}")]
    Parse(String),

    /// A numerical procedure failed (singular operator, rank deficiency).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A stability certificate could not be produced at the requested rate.
    #[error("not certifiable: {0}")]
    NotCertifiable(String),

    /// Requested computation exceeds the configured cost guard rails.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// I/O failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for CLI use: 2 config, 3 numerical, 4 assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Parse(_) | Error::Json(_) => 2,
            Error::Numerical(_) | Error::NotCertifiable(_) | Error::Resource(_) => 3,
            Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
