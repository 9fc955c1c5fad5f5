use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("physics error: {0}")]
    Physics(String),
    #[error("infeasible motor geometry: {0}")]
    InfeasibleGeometry(String),
    #[error("voltage budget exhausted: V_dq_max = {v_dq_max} V")]
    VoltageBudget { v_dq_max: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular articulated inertia at body {body}")]
    SingularInertia { body: usize },
    #[error("non-smooth point: a branch was taken on a boundary with live partials")]
    NonSmoothPoint,
}
