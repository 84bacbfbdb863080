use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Io(_) => 4,
            CliError::Run(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<rvfield::Error> for CliError {
    fn from(e: rvfield::Error) -> Self {
        use rvfield::Error::*;
        let msg = e.to_string();
        match e {
            InvalidModel(_) | DriftViolation(_) | NoPositiveScore | BracketFailure(_)
            | InvalidTruncation(_) => CliError::Model(msg),
            InvalidLevel(_)
            | InvalidArgument(_)
            | InvalidBlocking(_)
            | InvalidFunctional(_)
            | DimensionMismatch { .. }
            | Parse { .. } => CliError::Config(msg),
            Csv(_) => CliError::Io(msg),
            _ => CliError::Run(msg),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
