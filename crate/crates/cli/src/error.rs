use thiserror::Error;

/// Command failures, each mapped onto a process exit code:
/// 2 = configuration error, 3 = missing or incompatible artifact,
/// 4 = numerical/runtime failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("incompatible artifacts: {0}")]
    IncompatibleArtifacts(String),
    #[error("runtime failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact(_) | CliError::IncompatibleArtifacts(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Reading an artifact that is not there is a missing-artifact failure;
    /// anything else during IO is a runtime failure.
    pub fn from_read(path: &std::path::Path, err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingArtifact(path.display().to_string())
        } else {
            CliError::Numerical(format!("{}: {}", path.display(), err))
        }
    }
}

impl From<ghostimg::data::DataError> for CliError {
    fn from(e: ghostimg::data::DataError) -> Self {
        match e {
            ghostimg::data::DataError::Io(ref io)
                if io.kind() == std::io::ErrorKind::NotFound =>
            {
                CliError::MissingArtifact(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ghostimg::optics::OpticsError> for CliError {
    fn from(e: ghostimg::optics::OpticsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ghostimg::recon::ReconError> for CliError {
    fn from(e: ghostimg::recon::ReconError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ghostimg::metrics::MetricsError> for CliError {
    fn from(e: ghostimg::metrics::MetricsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ghostimg::translator::TranslatorError> for CliError {
    fn from(e: ghostimg::translator::TranslatorError) -> Self {
        use ghostimg::translator::TranslatorError as T;
        match e {
            T::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingArtifact(e.to_string())
            }
            T::SourceLengthMismatch { .. } | T::MixedSourceLengths(..) => {
                CliError::IncompatibleArtifacts(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}
