use std::path::Path;

use thiserror::Error;

/// Failure of a CLI run, one variant per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Validation(String),

    /// The pipeline ran but a checked quantity missed its threshold.
    #[error("tolerance not met: {0}")]
    Tolerance(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<slabqed::Error> for CliError {
    fn from(err: slabqed::Error) -> Self {
        use slabqed::Error as E;
        let text = err.to_string();
        match err {
            E::InvalidParameter { .. } | E::Domain { .. } | E::Usage(_) | E::OracleUnavailable { .. } => {
                CliError::Validation(text)
            }
            E::DegenerateWronskian { .. } | E::Quadrature { .. } | E::KrylovConvergence { .. } | E::Linalg(_) => {
                CliError::Numerical(text)
            }
            E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Io(text),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
