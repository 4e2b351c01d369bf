use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Runtime(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: silofed::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 configuration, 2 data, 3 runtime or capacity.
    pub fn exit_code(&self) -> i32 {
        use silofed::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
            CliError::Phase { source, .. } => match source {
                E::Config(_) => 1,
                E::Schema(_)
                | E::MissingColumn(_)
                | E::Row { .. }
                | E::Partition { .. }
                | E::DegenerateClass { .. }
                | E::Reference(_)
                | E::IncompatibleModel(_)
                | E::Csv(_)
                | E::Json(_)
                | E::Io { .. } => 2,
                _ => 3,
            },
        }
    }
}

/// Attaches the phase name to core errors.
pub trait Phase<T> {
    fn phase(self, phase: &'static str) -> CliResult<T>;
}

impl<T> Phase<T> for silofed::Result<T> {
    fn phase(self, phase: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Phase { phase, source })
    }
}
