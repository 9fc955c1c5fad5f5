use mobman_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("unsupported collocation degree {0}; expected 1 to 9")]
    UnsupportedDegree(usize),
    #[error("collocation points are not distinct")]
    DuplicatePoints,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("infeasible bounds: {0}")]
    InfeasibleBounds(String),
    #[error("solver hit the iteration limit ({0})")]
    MaxIterations(usize),
    #[error("solver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("closed-loop integration diverged at t = {0} s")]
    IntegrationDiverged(f64),
    #[error("infeasible design seed: {0}")]
    InfeasibleSeed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}
