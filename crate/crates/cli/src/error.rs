use hdqkd_core::Error as CoreError;

/// Exit codes: 0 success, 1 failed verification, 2 infeasible input,
/// 64 usage error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Infeasible(_) => 2,
            CliError::VerifyFailed(_) => 1,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InfeasibleRates(_)
            | CoreError::NoFeasibleRoot { .. }
            | CoreError::InfeasibleConstraints(_) => CliError::Infeasible(e.to_string()),
            CoreError::NonConvergence { .. } => CliError::Other(anyhow::anyhow!(e)),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
