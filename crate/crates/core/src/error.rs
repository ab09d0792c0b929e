use std::path::PathBuf;

use thiserror::Error;

use crate::domain::Violation;

/// Precondition failures of pure domain operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("angle {angle} outside control interval [{min}, {max}]")]
    AngleOutOfRange { angle: f64, min: f64, max: f64 },
    #[error("mode {0} is not in the mode set")]
    InvalidMode(usize),
    #[error("{0}")]
    Precondition(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid scenario:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("policy cycle at t = {time}: switch to mode {to} immediately followed by another switch")]
    PolicyCycle { time: f64, to: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            path: path.to_string(),
            message: message.to_string(),
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
