use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("orbital index too large: {index} exceeds cap {cap}")]
    OrbitalIndexTooLarge { index: usize, cap: usize },

    #[error("invalid trap: {0}")]
    InvalidTrap(String),

    #[error("trap is not confining: {0}")]
    NotConfining(String),

    #[error("state {index} not converged on the grid: eigenvalue shift {achieved:.3e} exceeds {tolerance:.3e}")]
    NotConverged {
        index: usize,
        achieved: f64,
        tolerance: f64,
    },

    #[error("degenerate level unsupported: level {level} at E_F = {energy} has {multiplicity} occupations")]
    DegenerateLevel {
        level: usize,
        energy: f64,
        multiplicity: usize,
    },

    #[error("invalid occupation: {0}")]
    InvalidOccupation(String),

    #[error("integration tolerance not reached: best estimate {estimate} with error {achieved:.3e} (target {tolerance:.3e})")]
    ToleranceNotReached {
        estimate: f64,
        achieved: f64,
        tolerance: f64,
    },

    #[error("invalid boundary index {k} for {n} particles")]
    InvalidBoundary { k: usize, n: usize },

    #[error("particle number {0} outside supported range")]
    ParticleCount(usize),

    #[error("invalid component spec: {0}")]
    InvalidComponents(String),

    #[error("expected {expected} boundary weights, got {got}")]
    WeightCount { expected: usize, got: usize },

    #[error("boundary weight {k} is not positive: {value}")]
    NonPositiveWeight { k: usize, value: f64 },

    #[error("matrix is not symmetric: max asymmetry {0:.3e}")]
    NonSymmetric(f64),

    #[error("matrix of dimension {dim} exceeds the dense solver limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("amplitude vector has length {got}, expected {expected}")]
    AmplitudeLength { expected: usize, got: usize },

    #[error("eigensolver did not converge: residual {residual:.3e}")]
    EigenNotConverged { residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("insufficient data for slope fit: {0}")]
    InsufficientPoints(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
