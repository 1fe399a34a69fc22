//! Successive convexification for discrete non-convex optimal control with
//! convex keep-out constraints, built on an in-crate second-order cone
//! interior-point solver.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conic;
pub mod convex_fn;
pub mod driver;
pub mod error;
pub mod linearizer;
pub mod penalty;
pub mod problem;
pub mod projector;
pub mod quadrotor;
pub mod sampler;
pub mod subproblem;

pub use convex_fn::{ConvexFn, Curvature, ProjectorKind};
pub use driver::{
    convex_relaxation, find_feasible_start, fixed_point_residual, scvx, FeasibleStart, ScvxConfig, ScvxStatus,
    SolveReport, TrustRegionSchedule,
};
pub use error::{Result, ScvxError};
pub use linearizer::{build_feasible_region, FeasibleRegion, Halfspace};
pub use penalty::{penalty_value, PenaltyConfig, PenaltyMode, WeightCheck};
pub use problem::{
    BaseConstraint, BaseSet, ConstraintKind, ConstraintSpec, Objective, OptimalControlProblem, ProblemDims,
    StackedVariable, StageCost,
};
pub use projector::{project, project_generic, ProjectionMethod, ProjectionResult};
pub use quadrotor::{Obstacle, QuadrotorScenario, TrajectoryRecord};
