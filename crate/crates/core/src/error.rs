use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unstable operating point: utilization {rho} must be < 1")]
    Unstable { rho: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl ModelError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        ModelError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ModelError::Config(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceErrorKind {
    #[error("expected `timestamp_seconds,frame_bytes`")]
    MissingField,
    #[error("invalid timestamp `{0}`")]
    BadTimestamp(String),
    #[error("invalid frame size `{0}`")]
    BadSize(String),
    #[error("size out of range: {0} (expected 1..=65535)")]
    SizeOutOfRange(u64),
    #[error("non-monotone timestamp {got} after {prev}")]
    NonMonotone { prev: f64, got: f64 },
    #[error("read failure: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace line {line}: {kind}")]
    Line { line: usize, kind: TraceErrorKind },
    #[error("no records")]
    Empty,
    #[error("invalid rate scale {0}")]
    BadScale(f64),
}

impl TraceError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TraceError::Line { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}
