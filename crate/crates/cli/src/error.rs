use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration value is missing, malformed or out of range.
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] concreg_core::Error),

    /// Output was written but a property requested with `--check` failed.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        CliError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// 1 for bad input, 2 for a computation that could not be completed,
    /// 3 for a failed `--check`.
    pub fn exit_code(&self) -> i32 {
        use concreg_core::Error as E;
        match self {
            CliError::Invalid { .. } | CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Core(E::Size(_) | E::Spec(_) | E::Domain(_) | E::Resource(_)) => 1,
            CliError::Core(E::Solver { .. } | E::Range(_) | E::Fit(_)) => 2,
            CliError::Check(_) => 3,
        }
    }
}
