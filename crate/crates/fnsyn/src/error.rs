use std::path::Path;
use std::process::ExitCode;

/// Errors surfaced by the CLI, each mapped to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn missing(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            Self::MissingInput(format!("{} not found", path.display()))
        } else {
            Self::Io(e)
        }
    }

    /// 0 ok, 2 config, 3 missing input, 4 numeric; other failures use 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::MissingInput(_) => 3,
            Self::Numeric(_) => 4,
            Self::Input(_) | Self::Io(_) => 1,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

impl From<fnsyn_core::Error> for CliError {
    fn from(e: fnsyn_core::Error) -> Self {
        use fnsyn_core::Error as E;
        match e {
            E::Config(m) | E::Domain(m) => Self::Config(m),
            E::Numeric(m) => Self::Numeric(m),
            E::Shape(m) => Self::Input(m),
        }
    }
}
