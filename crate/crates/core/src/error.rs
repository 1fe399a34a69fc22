use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T, E = ScvxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ScvxError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("constraint {index} is not differentiable here: norm argument {norm:.3e} inside the 1e-12 exclusion radius")]
    Singularity { index: usize, norm: f64 },

    #[error("sampled convexity check failed for {what}: midpoint excess {excess:.3e}")]
    NotConvex { what: String, excess: f64 },

    #[error("point is not feasible ({detail}); use find_feasible_start to obtain a feasible anchor")]
    InfeasibleAnchor { detail: String },

    #[error("constraint qualification violated: gradient of constraint {index} has norm {norm:.3e} at its projection")]
    Licq { index: usize, norm: f64 },

    #[error("cone solver returned {status:?} after {iterations} iterations ({context})")]
    Solver {
        status: SolveStatus,
        iterations: usize,
        context: String,
    },

    #[error("scenario is infeasible: {0}")]
    InfeasibleScenario(String),

    #[error("model not supported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}
