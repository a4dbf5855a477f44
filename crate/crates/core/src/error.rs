//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category. Each maps to a fixed process exit code and a
/// fixed FFI status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or filesystem trouble.
    Usage,
    /// Malformed input files.
    Format,
    /// Linear algebra or iterative solver failure.
    Numerical,
    /// The data does not meet a statistical precondition.
    Statistical,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Format => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Statistical => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e}, largest magnitude {max_abs:e})")]
    NotPsd { eigenvalue: f64, max_abs: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("insufficient samples: need at least {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("regression is degenerate: {0}")]
    RegressionDegenerate(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("comparison graph is not connected: {0}")]
    NotConnected(String),

    #[error("entity '{label}' has no wins; its maximum-likelihood score is zero")]
    WinlessEntity { label: String },

    #[error("no convergence after {iterations} iterations (last change {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },

    #[error("scores must be strictly positive and finite (index {index}, value {value})")]
    NonPositiveGamma { index: usize, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("constant input: rank correlation is undefined")]
    ConstantInput,

    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("bad magic bytes {found:?}")]
    BadMagic { found: Vec<u8> },

    #[error("truncated file: header declares {expected} bytes, {actual} present")]
    TruncatedFile { expected: u64, actual: u64 },

    #[error("trailing bytes: header declares {expected} bytes, file has {actual}")]
    TrailingBytes { expected: u64, actual: u64 },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("schema violation{}: {message}", location(*row, *col))]
    SchemaViolation {
        row: Option<usize>,
        col: Option<usize>,
        message: String,
    },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn location(row: Option<usize>, col: Option<usize>) -> String {
    match (row, col) {
        (Some(r), Some(c)) => format!(" at row {r}, column {c}"),
        (Some(r), None) => format!(" at row {r}"),
        (None, Some(c)) => format!(" at column {c}"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// Stable machine-readable name, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotPsd { .. } => "NotPSD",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::RegressionDegenerate(_) => "RegressionDegenerate",
            Error::EmptyInput(_) => "EmptyInput",
            Error::NotConnected(_) => "NotConnected",
            Error::WinlessEntity { .. } => "WinlessEntity",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NonPositiveGamma { .. } => "NonPositiveGamma",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ConstantInput => "ConstantInput",
            Error::UnsupportedChannels(_) => "UnsupportedChannels",
            Error::BadMagic { .. } => "BadMagic",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::TrailingBytes { .. } => "TrailingBytes",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::SchemaViolation { .. } => "SchemaViolation",
            Error::FileNotFound(_) => "FileNotFound",
            Error::Io { .. } => "IoError",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use ErrorCategory::*;
        match self {
            Error::FileNotFound(_) | Error::Io { .. } | Error::InvalidArgument(_) => Usage,
            Error::BadMagic { .. }
            | Error::TruncatedFile { .. }
            | Error::TrailingBytes { .. }
            | Error::UnsupportedVersion(_)
            | Error::UnsupportedDtype(_)
            | Error::NonFiniteValue { .. }
            | Error::SchemaViolation { .. }
            | Error::UnsupportedChannels(_)
            | Error::DimensionMismatch { .. } => Format,
            Error::NotSymmetric { .. }
            | Error::NotPsd { .. }
            | Error::NumericalFailure(_)
            | Error::RegressionDegenerate(_)
            | Error::NoConvergence { .. }
            | Error::NonPositiveGamma { .. } => Numerical,
            Error::DegenerateInput(_)
            | Error::InsufficientSamples { .. }
            | Error::EmptyInput(_)
            | Error::NotConnected(_)
            | Error::WinlessEntity { .. }
            | Error::LengthMismatch { .. }
            | Error::ConstantInput => Statistical,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    pub(crate) fn schema(row: Option<usize>, col: Option<usize>, message: impl Into<String>) -> Self {
        Error::SchemaViolation {
            row,
            col,
            message: message.into(),
        }
    }

    /// Wraps an io error, turning `NotFound` into [`Error::FileNotFound`].
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_categories() {
        assert_eq!(Error::FileNotFound("x".into()).exit_code(), 2);
        assert_eq!(Error::BadMagic { found: vec![] }.exit_code(), 3);
        assert_eq!(Error::NotPsd { eigenvalue: -1.0, max_abs: 1.0 }.exit_code(), 4);
        assert_eq!(Error::ConstantInput.exit_code(), 5);
    }

    #[test]
    fn schema_violation_reports_location() {
        let e = Error::schema(Some(3), Some(1), "diagonal must be zero");
        assert_eq!(e.to_string(), "schema violation at row 3, column 1: diagonal must be zero");
    }
}
