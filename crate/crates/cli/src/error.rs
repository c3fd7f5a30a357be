//! CLI error type and its mapping onto process exit codes.
//!
//! Each failure class exits with its own code so scripts can branch
//! without scraping messages:
//!
//! | code | class                                            |
//! |------|--------------------------------------------------|
//! | 0    | success, output produced                         |
//! | 2    | command-line usage error (emitted by the parser) |
//! | 10   | malformed file content (CSV or config file)      |
//! | 11   | invalid values: shapes, ranges, missing options  |
//! | 12   | SVD did not converge                             |
//! | 13   | integration grid construction failed             |
//! | 14   | sampler failure                                  |
//! | 15   | file I/O failure                                 |

use thiserror::Error;

/// Failure classes surfaced by the binary.
#[derive(Debug, Error)]
pub enum CliError {
    /// A file's content could not be parsed. `line` is 1-based and
    /// present whenever the reader can attribute the defect to a line.
    #[error("{path}{}: {msg}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Parse {
        path: String,
        line: Option<u64>,
        msg: String,
    },

    /// A value is out of range, inconsistent, or missing.
    #[error("{0}")]
    Invalid(String),

    /// The numerical library rejected the problem.
    #[error(transparent)]
    Core(#[from] svdmarg::Error),

    /// Reading or writing a file failed.
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 10,
            CliError::Invalid(_) => 11,
            CliError::Core(e) => match e {
                svdmarg::Error::Validation(_) | svdmarg::Error::Functional(_) => 11,
                svdmarg::Error::SvdFailed { .. } => 12,
                svdmarg::Error::Grid(_) => 13,
                svdmarg::Error::Sampler(_) | svdmarg::Error::Unconverged(_) => 14,
            },
            CliError::Io { .. } => 15,
        }
    }
}

/// Wraps an I/O error with the path it occurred on.
pub fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
