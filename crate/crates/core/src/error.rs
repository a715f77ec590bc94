use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular (pivot {pivot:.3e} below {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps (active block {lo}..={hi}, subdiagonal {subdiagonal:.3e})")]
    NoConvergence {
        iterations: usize,
        lo: usize,
        hi: usize,
        subdiagonal: f64,
    },

    #[error("tap sequence must have even length >= 2, got {0}")]
    OddTapLength(usize),

    #[error("unknown builtin system `{0}` (expected lebesgue2 or cantor3)")]
    UnknownSystem(String),

    #[error("column isometry residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Validation { residual: f64, tolerance: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("level {level} is too deep: {words} words exceed the limit of {limit}")]
    LevelTooDeep { level: usize, words: f64, limit: usize },

    #[error("all channels annihilate the state at step {step} (total probability {total:.3e})")]
    DeadState { step: usize, total: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("dominant eigenvalue is not simple: |p(a0)| = {0:.3e}")]
    Multiplicity(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
