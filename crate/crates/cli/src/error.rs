use std::fmt;
use std::path::Path;

use hystkin::{DatasetError, GmmError, GmrError, IkError, SimError};

/// Machine-readable error class printed as the first token on stderr.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Io,
    Config,
    Unreachable,
    Em,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Io => "E_IO",
            ErrorCode::Config => "E_CONFIG",
            ErrorCode::Unreachable => "E_UNREACHABLE",
            ErrorCode::Em => "E_EM",
        }
    }

    pub fn exit_status(self) -> i32 {
        match self {
            ErrorCode::Config => 2,
            ErrorCode::Io => 3,
            ErrorCode::Em => 4,
            ErrorCode::Unreachable => 5,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        // Keep the report on one line.
        let message = message.into().lines().map(str::trim).collect::<Vec<_>>().join(" ");
        CliError { code, message }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Config, message)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(ErrorCode::Io, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidSplit { .. } | DatasetError::InvalidBounds(..) => CliError::config(e.to_string()),
            _ => CliError::new(ErrorCode::Io, e.to_string()),
        }
    }
}

impl From<GmmError> for CliError {
    fn from(e: GmmError) -> Self {
        match e {
            GmmError::InvalidKRange { .. } => CliError::config(e.to_string()),
            _ => CliError::new(ErrorCode::Em, e.to_string()),
        }
    }
}

impl From<GmrError> for CliError {
    fn from(e: GmrError) -> Self {
        CliError::new(ErrorCode::Em, e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Unreachable { .. } => CliError::new(ErrorCode::Unreachable, e.to_string()),
            SimError::Dataset(inner) => inner.into(),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<IkError> for CliError {
    fn from(e: IkError) -> Self {
        let code = match &e {
            IkError::Dataset(_) | IkError::Io(_) | IkError::Bundle(_) => ErrorCode::Io,
            IkError::Em { .. } | IkError::Gmr(_) | IkError::EmptyBranch { .. } => ErrorCode::Em,
            IkError::Unreachable { .. } => ErrorCode::Unreachable,
            IkError::TooFewCycles(_) | IkError::NonFiniteTarget | IkError::InvalidParameter(_) => ErrorCode::Config,
        };
        CliError::new(code, e.to_string())
    }
}
