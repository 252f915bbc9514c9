use saa_conic::{ConicError, LinalgError, SolveStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("infeasible specification: {0}")]
    InfeasibleSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("no strictly feasible starting point: {0}")]
    Initialization(String),
    #[error("selection recovery failed: {0}")]
    RecoveryFailed(String),
    #[error("solver returned {status:?}: {context}")]
    Solver { status: SolveStatus, context: String },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
