use quadstab::{ExtractError, LabError, SeriesError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Divergent { field: String, message: String },
    #[error("instance: {0}")]
    Lab(#[from] LabError),
    #[error("extraction: {0}")]
    Extract(#[from] ExtractError),
    #[error("series: {0}")]
    Series(#[from] SeriesError),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// Every error is a rejection; check failures are not errors.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
