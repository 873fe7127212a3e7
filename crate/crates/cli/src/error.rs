use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::CheckFailed(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<vbshift::Error> for CliError {
    fn from(err: vbshift::Error) -> Self {
        match err {
            vbshift::Error::InvalidArgument(_) | vbshift::Error::Domain(_) => CliError::Config(err.to_string()),
            _ => CliError::Numeric(err.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Config(format!("JSON: {err}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(err))
    }
}
