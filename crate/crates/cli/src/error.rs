use thiserror::Error;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration, unsupported problem, I/O failure.
    #[error("{0}")]
    Config(String),
    /// Overlapping caps: the closed-form support does not apply.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The optimizer's line search failed in every restart.
    #[error("optimizer: {0}")]
    Optimizer(String),
    /// At least one verification check failed.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Optimizer(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("I/O error: {e}"))
    }
}

impl From<sphere_equilibrium::Error> for CliError {
    fn from(e: sphere_equilibrium::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("CSV error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("JSON error: {e}"))
    }
}
