use std::path::PathBuf;

use serde_json::json;

/// Malformed input, located by 1-based line number.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{source_name}:{line}: {message}")]
pub struct ParseError {
    pub source_name: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qgcn_core::Error),
    #[error("tolerance violated: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: e.to_string() }
    }

    /// 1 input error, 2 tolerance violation, 3 internal invariant failure.
    pub fn exit_code(&self) -> i32 {
        use qgcn_core::Error as E;
        match self {
            CliError::Tolerance(_) => 2,
            CliError::Core(E::Invariant(_) | E::UncomputeResidual(_) | E::NonClassicalBranch(_) | E::DestNotZero(_)) => 3,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Io { .. } => "io",
            CliError::Input(_) => "input",
            CliError::Usage(_) => "usage",
            CliError::Core(_) if self.exit_code() == 3 => "invariant",
            CliError::Core(_) => "pipeline",
            CliError::Tolerance(_) => "tolerance",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Parse(p) => {
                v["path"] = json!(p.source_name);
                v["line"] = json!(p.line);
            }
            CliError::Io { path, .. } => v["path"] = json!(path),
            _ => {}
        }
        v
    }
}

pub type CliResult<T> = Result<T, CliError>;
