use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] fblsec::Error),

    #[error("trend check failed:\n{}", .0.join("\n"))]
    Trend(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for an unusable or infeasible configuration, 3 for a failed trend
    /// check, 1 for I/O and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(fblsec::Error::DegenerateLocalPoint(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Trend(_) => 3,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}
