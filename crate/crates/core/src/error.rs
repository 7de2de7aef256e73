use thiserror::Error;

/// Errors raised by the geometry, codebook, channel and pattern layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("non-finite angle: {0}")]
    NonFiniteAngle(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid phase-state set: {0}")]
    InvalidStates(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid angle grid: {0}")]
    InvalidGrid(String),

    #[error("index ({m}, {n}) out of range for a {rows}x{cols} surface")]
    IndexOutOfRange {
        m: usize,
        n: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("pattern has no -3 dB crossing on the {0} side of the peak")]
    NoCrossing(&'static str),

    #[error("invalid pattern request: {0}")]
    InvalidPattern(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
