use std::path::PathBuf;

use chainstack_core::CoreError;

/// Tool-level errors with scriptable exit codes: 2 = IO/parse,
/// 3 = dimension/contract, 4 = numerical failure, 5 = non-convergence.
#[derive(Debug)]
pub enum CliError {
    Io {
        path: PathBuf,
        message: String,
    },
    Parse {
        path: PathBuf,
        row: Option<usize>,
        col: Option<usize>,
        message: String,
    },
    Core(CoreError),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io { path, message } => write!(f, "{message}: {}", path.display()),
            CliError::Parse {
                path,
                row,
                col,
                message,
            } => {
                write!(f, "{message} in {}", path.display())?;
                if let Some(r) = row {
                    write!(f, " at row {r}")?;
                }
                if let Some(c) = col {
                    write!(f, ", column {c}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => "IO",
            CliError::Usage(_) => "CONTRACT",
            CliError::Core(e) => match e {
                CoreError::DimensionMismatch { .. }
                | CoreError::TooFewDraws { .. }
                | CoreError::NonFinite { .. }
                | CoreError::Domain(_)
                | CoreError::BoundViolation { .. } => "CONTRACT",
                CoreError::Numerical(_) => "NUMERICAL",
                CoreError::Convergence { .. } => "CONVERGENCE",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "IO" => 2,
            "CONTRACT" => 3,
            "NUMERICAL" => 4,
            "CONVERGENCE" => 5,
            _ => 1,
        }
    }

    /// Machine-readable error record for stderr.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("schema".into(), serde_json::json!(1));
        let mut err = serde_json::Map::new();
        err.insert("code".into(), serde_json::json!(self.code()));
        err.insert("message".into(), serde_json::json!(self.to_string()));
        match self {
            CliError::Io { path, .. } | CliError::Parse { path, .. } => {
                err.insert("path".into(), serde_json::json!(path.display().to_string()));
            }
            _ => {}
        }
        obj.insert("error".into(), serde_json::Value::Object(err));
        serde_json::Value::Object(obj).to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
