//! Convex subproblem `min { P(y) | y ∈ F_z }` as a cone program.
//!
//! Column layout: `y` first (`0..N_y`), then objective epigraph variables,
//! then penalty epigraph variables. Row layout: base set, equality-mode
//! dynamics, halfspaces, objective cones, penalty cones.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::conic::{ConicProgram, ConicSolution, LinExpr, ProgramBuilder, SolveStatus};
use crate::error::{Result, ScvxError};
use crate::linearizer::{FeasibleRegion, RegionRows};
use crate::penalty::{penalty_value, PenaltyConfig, PenaltyMode};
use crate::problem::{OptimalControlProblem, StackedVariable, StageCost};
use crate::projector::encode_sublevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemArtifacts {
    pub program: ConicProgram,
    pub y_cols: Range<usize>,
    pub objective_cols: Range<usize>,
    /// `t_j ≥ g_j(y)` auxiliaries, one per dynamics defect (penalty mode
    /// with λ > 0 only).
    pub penalty_cols: Range<usize>,
    pub region_rows: RegionRows,
    pub objective_rows: Range<usize>,
    pub penalty_rows: Range<usize>,
    /// Constant part of the objective not carried by `c`.
    pub objective_constant: f64,
    pub mode: PenaltyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub z_next: StackedVariable,
    /// Duals of the dynamics rows: equality rows in equality mode, the
    /// linearized `g ≥ 0` rows in penalty mode.
    pub dyn_multipliers: Vec<f64>,
    /// `P(z_next)` recomputed from `y`.
    pub objective_value: f64,
    /// `cᵀx` plus the constant part.
    pub solver_objective: f64,
}

fn add_objective(problem: &OptimalControlProblem, pb: &mut ProgramBuilder) -> (Range<usize>, Range<usize>, f64) {
    let dims = &problem.dims;
    let obj = &problem.objective;
    let row0 = pb.num_rows();
    let col0 = pb.num_cols();
    let mut constant = obj.offset;
    match &obj.stage {
        StageCost::ControlNorm => {
            for i in 0..dims.t - 1 {
                let t = pb.add_columns(1).start;
                pb.add_cost(t, 1.0);
                let mut rows = vec![LinExpr::var(t)];
                rows.extend(dims.control_range(i).map(LinExpr::var));
                pb.add_soc(&rows);
            }
        }
        StageCost::Unit => constant += (dims.t - 1) as f64,
        StageCost::Quadratic {
            state_weights,
            control_weights,
        } => {
            for i in 0..dims.t {
                let mut terms: Vec<LinExpr> = dims
                    .state_range(i)
                    .zip(state_weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(c, w)| LinExpr::default().term(c, w.sqrt()))
                    .collect();
                if i + 1 < dims.t {
                    terms.extend(
                        dims.control_range(i)
                            .zip(control_weights)
                            .filter(|(_, w)| **w > 0.0)
                            .map(|(c, w)| LinExpr::default().term(c, w.sqrt())),
                    );
                }
                if terms.is_empty() {
                    continue;
                }
                // ½‖v‖² ≤ t  ⇔  (t + ½, t − ½, v) ∈ SOC
                let t = pb.add_columns(1).start;
                pb.add_cost(t, 1.0);
                let mut rows = vec![LinExpr::var(t).plus_constant(0.5), LinExpr::var(t).plus_constant(-0.5)];
                rows.extend(terms);
                pb.add_soc(&rows);
            }
        }
    }
    (col0..pb.num_cols(), row0..pb.num_rows(), constant)
}

pub fn assemble(
    problem: &OptimalControlProblem,
    config: &PenaltyConfig,
    region: &FeasibleRegion,
) -> Result<SubproblemArtifacts> {
    if region.mode != config.mode {
        return Err(ScvxError::InvalidProblem(
            "region was linearized for a different penalty mode".into(),
        ));
    }
    config.validate(problem)?;
    let n_y = problem.dims.n_y();
    let mut pb = ProgramBuilder::new();
    let y_cols = pb.add_columns(n_y);
    let cols: Vec<usize> = y_cols.clone().collect();
    let region_rows = region.encode(problem, &mut pb, &cols);
    let (objective_cols, objective_rows, objective_constant) = add_objective(problem, &mut pb);

    let pcol0 = pb.num_cols();
    let prow0 = pb.num_rows();
    if config.mode == PenaltyMode::Penalty && config.lambda > 0.0 {
        for spec in &problem.constraints()[..problem.dims.num_dynamics()] {
            let t = pb.add_columns(1).start;
            pb.add_cost(t, config.lambda);
            // g_j(w) − t ≤ 0
            let d = spec.func.dim();
            let mut f = spec.func.embed(d + 1, &(0..d).collect::<Vec<_>>());
            f.linear[d] = -1.0;
            let mut local: Vec<usize> = spec.indices.clone();
            local.push(t);
            encode_sublevel(&mut pb, &f, &local)?;
        }
    }
    let penalty_cols = pcol0..pb.num_cols();
    let penalty_rows = prow0..pb.num_rows();

    Ok(SubproblemArtifacts {
        program: pb.build(),
        y_cols,
        objective_cols,
        penalty_cols,
        region_rows,
        objective_rows,
        penalty_rows,
        objective_constant,
        mode: config.mode,
    })
}

pub fn extract(
    problem: &OptimalControlProblem,
    config: &PenaltyConfig,
    artifacts: &SubproblemArtifacts,
    solution: &ConicSolution,
) -> Result<Extracted> {
    if solution.status != SolveStatus::Optimal {
        return Err(ScvxError::Solver {
            status: solution.status,
            iterations: solution.iterations,
            context: format!("subproblem residuals {:?}", solution.residuals),
        });
    }
    let y = solution.x[artifacts.y_cols.clone()].to_vec();
    let dyn_multipliers = match artifacts.mode {
        PenaltyMode::Equality => solution.z[artifacts.region_rows.dynamics.clone()].to_vec(),
        PenaltyMode::Penalty => {
            let start = artifacts.region_rows.halfspaces.start;
            solution.z[start..start + problem.dims.num_dynamics()].to_vec()
        }
    };
    let objective_value = penalty_value(problem, config, &y)?;
    Ok(Extracted {
        z_next: StackedVariable(y),
        dyn_multipliers,
        objective_value,
        solver_objective: solution.primal_objective(&artifacts.program) + artifacts.objective_constant,
    })
}
