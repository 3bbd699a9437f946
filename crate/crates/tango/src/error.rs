use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tango_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// A record that is not well-formed JSON or does not fit its schema.
    #[error("{context}: line {line}, column {column}, at `{field}`: {message}")]
    Parse { context: String, line: usize, column: usize, field: String, message: String },
    #[error("{context}: expected schema `{expected}`, found `{found}`")]
    Schema { context: String, expected: &'static str, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: &str, line: usize, column: usize, field: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), line, column, field: field.into(), message: message.to_string() }
    }
}
