//! Errors and their exit statuses.

use brane_core::BraneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration; `path` locates the offending key.
    #[error("{}", located(path, message))]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] BraneError),

    /// The run finished but missed its numerical target; the report is still written.
    #[error("{0}")]
    Numerical(String),
}

fn located(path: &str, message: &str) -> String {
    if path.is_empty() {
        message.to_string()
    } else {
        format!("{path}: {message}")
    }
}

impl CliError {
    /// 2 for configuration and validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                BraneError::Domain { .. }
                | BraneError::Degenerate { .. }
                | BraneError::DegenerateMetric { .. }
                | BraneError::NormalFrame { .. }
                | BraneError::NoConvergence { .. } => 3,
                _ => 2,
            },
        }
    }
}
