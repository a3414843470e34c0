use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("no feasible candidate footholds at any time step")]
    NoCandidates,
    #[error("QP is primal infeasible (steps without candidates: {empty_steps:?})")]
    Infeasible { empty_steps: Vec<usize> },
    #[error("KKT factorization hit a zero pivot at column {0}")]
    Factorization(usize),
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("three or more overlapping stance phases at step {0}")]
    SideConflict(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
