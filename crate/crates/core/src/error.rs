use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("particle set must contain at least one particle")]
    EmptyParticleSet,

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Every importance weight vanished. `frame` is set once the error leaves a tracking loop.
    #[error("all particle weights are zero{}", frame.map(|k| format!(" at frame {k}")).unwrap_or_default())]
    DegenerateWeights { frame: Option<usize> },

    #[error("could not generate a trajectory inside the frame after {attempts} attempts")]
    TrajectoryRejected { attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by a bad configuration rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::EmptyParticleSet)
    }

    pub(crate) fn at_frame(self, frame: usize) -> Self {
        match self {
            Error::DegenerateWeights { .. } => Error::DegenerateWeights { frame: Some(frame) },
            other => other,
        }
    }
}
