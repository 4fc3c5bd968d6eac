use std::fmt;
use std::path::PathBuf;

/// Everything `pgas-mc` can fail with, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration; `field` is a dotted path.
    Config { field: String, msg: String },
    Io { path: PathBuf, source: std::io::Error },
    /// Failure inside a sampler.
    Run(pgas_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 1,
            CliError::Run(e) => match innermost(e) {
                pgas_core::Error::Config(_) | pgas_core::Error::InvalidArgument(_) => 1,
                _ => 2,
            },
        }
    }
}

fn innermost(e: &pgas_core::Error) -> &pgas_core::Error {
    match e {
        pgas_core::Error::AtIteration { source, .. } => innermost(source),
        other => other,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, msg } => write!(f, "config error in {field}: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Run(e) if self.exit_code() == 2 => write!(f, "numerical failure: {e}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pgas_core::Error> for CliError {
    fn from(e: pgas_core::Error) -> Self {
        CliError::Run(e)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
