use gibbs_lines_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 2 for anything the user can fix in the config, 1 for a run that went wrong.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 2,
            HarnessError::Core(e) => match e {
                CoreError::Domain(_)
                | CoreError::Parse(_)
                | CoreError::Inadmissible { .. }
                | CoreError::VanishingHamiltonian { .. }
                | CoreError::NonConvexHamiltonian(_)
                | CoreError::GridMismatch(_)
                | CoreError::StateSpaceTooLarge { .. }
                | CoreError::EmptyStateSpace(_) => 2,
                CoreError::CouplingViolation { .. } | CoreError::NoSamples(_) => 1,
            },
        }
    }
}
