use thiserror::Error;

/// Errors produced anywhere in the simulation, learning or harness code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 1,
            Error::Contract(_) | Error::State(_) | Error::Numeric(_) => 2,
            Error::Io(_) | Error::Csv(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
