use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqgError {
    #[error("data error: {0}")]
    Data(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("CFL violation: dt={dt} exceeds advisory {advisory_dt}")]
    Cfl { dt: f64, advisory_dt: f64 },
    #[error("blow-up at t={t}: {reason}")]
    BlowUp { t: f64, reason: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SqgError {
    fn from(e: std::io::Error) -> Self {
        SqgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SqgError>;
