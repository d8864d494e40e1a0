use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] wavefactor::Error),
}

impl CliError {
    /// 1 for anything the caller can fix in the invocation or input files,
    /// 2 when the numerics fail.
    pub fn exit_code(&self) -> u8 {
        use wavefactor::Error as E;
        match self {
            CliError::Core(
                E::InvalidDimension(_)
                | E::InvalidSpacing(_)
                | E::ShapeMismatch(_)
                | E::EmptyMask
                | E::InvalidGrid(_)
                | E::Unstable { .. }
                | E::InvalidIndices(_)
                | E::InvalidArgument(_),
            ) => 1,
            CliError::Core(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
