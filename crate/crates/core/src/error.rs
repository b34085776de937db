use thiserror::Error;

/// Errors raised anywhere in the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("matrix `{0}` is not Hermitian (max |M - M^dagger| = {1:e})")]
    NotHermitian(String, f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("eigendecomposition failed: {0}")]
    Eigensolver(String),

    #[error("eigenvectors not diagonalizable to working tolerance: {0}")]
    NotDiagonalizable(String),

    #[error("steady state is not unique: {count} eigenvalues within zero tolerance {tolerance:e}")]
    NonUniqueSteadyState { count: usize, tolerance: f64 },

    #[error("no eigenvalue within zero tolerance (smallest |lambda| = {0:e})")]
    NoSteadyState(f64),

    #[error("times must be strictly increasing")]
    UnorderedTimes,

    #[error("stability guard violated: dt * max_rate = {0:e} exceeds {1}")]
    StabilityGuard(f64, f64),

    #[error("trace collapsed to {trace:e} at step {step}")]
    TraceCollapse { step: u64, trace: f64 },

    #[error("density matrix lost positivity (min eigenvalue {min_eigenvalue:e}) at step {step}")]
    PositivityLost { step: u64, min_eigenvalue: f64 },

    #[error("too few segments: have {got}, need at least {need}")]
    TooFewSegments { got: usize, need: usize },

    #[error("frequency grid not representable: {0}")]
    Grid(String),

    #[error("grid mismatch between spectra: {0}")]
    GridMismatch(String),

    #[error("peak not resolvable on grid: {0}")]
    PeakUnresolved(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("model spec: {0}")]
    ModelSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
