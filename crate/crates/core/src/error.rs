use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("{}: {msg}", path.display())]
    Consistency { path: PathBuf, msg: String },

    #[error("I/O error on {}{}: {source}", path.display(), offset.map(|o| format!(" at byte offset {o}")).unwrap_or_default())]
    Io {
        path: PathBuf,
        offset: Option<u64>,
        #[source]
        source: std::io::Error,
    },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("round {round} failed: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            offset: None,
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than an
    /// internal contract breach.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Contract(_) | Error::Aggregation(_) => false,
            Error::Round { source, .. } => source.is_user_error(),
            _ => true,
        }
    }
}
