use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid value for `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
    #[error("missing required field `{field}` for scenario {scenario}")]
    Missing { field: &'static str, scenario: &'static str },
    #[error("numerical contract violated: {0}")]
    Numerical(#[from] ptgeom::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical-contract violations.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Field { .. } | CliError::Missing { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
