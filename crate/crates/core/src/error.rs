use thiserror::Error;

use crate::sdp::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NonConvergence(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("not a state: {0}")]
    NotAState(String),
    #[error("measurement is not informationally complete (rank {rank} < {dim})")]
    NotInformationallyComplete { rank: usize, dim: usize },
    #[error("decomposition residual {0:.3e} exceeds tolerance")]
    DecompositionResidual(f64),
    #[error("SDP solver finished with status {status:?} after {iterations} iterations (gap {gap:.3e})")]
    Solver { status: SolveStatus, iterations: usize, gap: f64 },
    #[error("task does not witness incompatibility: p_prior - p_post = {gap:.3e}")]
    DegenerateTask { gap: f64 },
    #[error("channels are compatible (slack {slack:.3e})")]
    PairCompatible { slack: f64 },
    #[error("compatibility verdict inconclusive (slack {slack:.3e}); tighten solver")]
    Inconclusive { slack: f64 },
    #[error("dual extraction failed: {0}")]
    DualExtraction(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("measurement effect {0} is not a nonzero projection")]
    NonProjective(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
