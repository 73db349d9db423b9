use std::path::PathBuf;

use sharp_core::Violation;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset failed validation: {}", render(.0))]
    Validation(Vec<Violation>),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] sharp_core::Error),
}

fn render(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;
