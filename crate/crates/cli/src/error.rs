use std::path::PathBuf;

use epon_gls::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or semantically invalid configuration / arguments.
    #[error("configuration error: {0}")]
    Config(String),

    /// `validate` found analytic and simulated values outside tolerance.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {source}\nhint: {hint}")]
    Numerical { source: ModelError, hint: &'static str },

    #[error("cannot {action} {}: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical { .. } => 4,
            CliError::Io { .. } => 5,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let hint = match &e {
            ModelError::Saturated { .. } => "lower the per-ONU rate or the service time so that rho_E < 1",
            ModelError::Unstable { .. } => {
                "the window limit cannot carry this rate; raise window_limit_pkts or use \"auto\""
            }
            ModelError::Heterogeneous => "the analytic model needs one common rate; use `simulate` for per-ONU rates",
            ModelError::MissingWindowLimit => "set window_limit_pkts to a number or \"auto\"",
            ModelError::EmptyWindows => "the arrival rate is zero; nothing to analyze",
            ModelError::InvalidParameter { .. } => "fix the named field in the configuration",
            _ => "the model is outside its numerical validity range; try a larger window or lower load",
        };
        if e.is_numerical() || matches!(e, ModelError::Unstable { .. } | ModelError::EmptyWindows) {
            CliError::Numerical { source: e, hint }
        } else {
            CliError::Config(format!("{e}\nhint: {hint}"))
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
