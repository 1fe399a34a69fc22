//! Successive convexification: project, linearize, solve, repeat.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicProgram, LinExpr, ProgramBuilder, SolveStatus, SolverSettings};
use crate::error::{Result, ScvxError};
use crate::linearizer::{
    build_feasible_region, check_anchor, dynamics_exprs, linearized_constraints, FeasibleRegion, ANCHOR_EQ_TOL,
    ANCHOR_TOL,
};
use crate::penalty::{penalty_value, validate_penalty_weight, PenaltyConfig, PenaltyMode, WeightCheck};
use crate::problem::{OptimalControlProblem, StackedVariable};
use crate::projector::nearest_boundary_point;
use crate::subproblem::{assemble, extract, Extracted};

/// `‖g(z*)‖₁` above this means the penalty was not exact at the chosen λ.
pub const PENALTY_EXACT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScvxConfig {
    pub epsilon: f64,
    pub max_successions: usize,
    pub penalty: PenaltyConfig,
    pub solver: SolverSettings,
    /// Keep every subproblem in the report.
    pub keep_programs: bool,
}

impl Default for ScvxConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_successions: 50,
            penalty: PenaltyConfig::default(),
            solver: SolverSettings::default(),
            keep_programs: false,
        }
    }
}

impl ScvxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_successions == 0 {
            return Err(ScvxError::InvalidProblem(format!(
                "need epsilon > 0 and max_successions ≥ 1 (got {}, {})",
                self.epsilon, self.max_successions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum ScvxStatus {
    Converged,
    MaxSuccessions,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolverStat {
    pub status: SolveStatus,
    pub iterations: usize,
    pub gap: f64,
    /// Solver objective including constants.
    pub objective: f64,
    /// `P` of the returned point.
    pub recomputed: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Accepted iterates `z⁰, z¹, …`; the last one is `z*`.
    pub iterates: Vec<StackedVariable>,
    pub penalty_values: Vec<f64>,
    /// `min_j q_j(zᵏ)` over the linearized constraints.
    pub feasibility_margins: Vec<f64>,
    /// Largest base-set violation per iterate.
    pub base_violations: Vec<f64>,
    /// One entry per subproblem solve, including the final check.
    pub subsolver_stats: Vec<SubsolverStat>,
    pub status: ScvxStatus,
    /// Improving steps taken, i.e. `k` of `z* = zᵏ`.
    pub successions: usize,
    pub subproblem_solves: usize,
    /// `P(z*) − Φ(z*)` from the last solve, anchored at `z*`.
    pub fixed_point_residual: Option<f64>,
    pub dyn_multipliers: Vec<f64>,
    pub weight_check: WeightCheck,
    /// `‖g(z*)‖₁`
    pub dynamics_l1: f64,
    pub penalty_exact: bool,
    pub warnings: Vec<String>,
    pub seconds: f64,
    #[serde(skip)]
    pub programs: Vec<ConicProgram>,
}

impl SolveReport {
    pub fn final_iterate(&self) -> &StackedVariable {
        self.iterates.last().expect("report always holds z⁰")
    }

    pub fn final_value(&self) -> f64 {
        *self.penalty_values.last().expect("report always holds P(z⁰)")
    }
}

fn margin(problem: &OptimalControlProblem, mode: PenaltyMode, y: &[f64]) -> Result<f64> {
    let q = problem.eval_q(y)?;
    Ok(q[linearized_constraints(problem, mode)]
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(*v)))
}

struct Step {
    extracted: Extracted,
    stat: SubsolverStat,
    program: ConicProgram,
}

fn solve_at(problem: &OptimalControlProblem, config: &ScvxConfig, region: &FeasibleRegion) -> Result<Step> {
    let started = Instant::now();
    let artifacts = assemble(problem, &config.penalty, region)?;
    let sol = conic::solve(&artifacts.program, &config.solver)?;
    let extracted = extract(problem, &config.penalty, &artifacts, &sol)?;
    let stat = SubsolverStat {
        status: sol.status,
        iterations: sol.iterations,
        gap: sol.gap,
        objective: extracted.solver_objective,
        recomputed: extracted.objective_value,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Step {
        extracted,
        stat,
        program: artifacts.program,
    })
}

/// Runs the successive convexification loop from a feasible `z0`.
///
/// Stops when a succession improves `P` by less than `epsilon`; that last
/// solve is anchored at `z*` and also yields the fixed-point residual. A
/// point from that final solve is not accepted, so `z*` is its anchor.
pub fn scvx(problem: &OptimalControlProblem, z0: &StackedVariable, config: &ScvxConfig) -> Result<SolveReport> {
    config.validate()?;
    config.penalty.validate(problem)?;
    let mode = config.penalty.mode;
    check_anchor(problem, mode, z0.as_slice())?;
    let started = Instant::now();

    let mut report = SolveReport {
        iterates: vec![z0.clone()],
        penalty_values: vec![penalty_value(problem, &config.penalty, z0.as_slice())?],
        feasibility_margins: vec![margin(problem, mode, z0.as_slice())?],
        base_violations: vec![problem.base_set.violation(z0.as_slice())],
        subsolver_stats: Vec::new(),
        status: ScvxStatus::MaxSuccessions,
        successions: 0,
        subproblem_solves: 0,
        fixed_point_residual: None,
        dyn_multipliers: Vec::new(),
        weight_check: WeightCheck::NotApplicable,
        dynamics_l1: 0.0,
        penalty_exact: true,
        warnings: Vec::new(),
        seconds: 0.0,
        programs: Vec::new(),
    };

    // The check solve at z* is one more than the succession cap.
    while report.subproblem_solves <= config.max_successions {
        let z = report.final_iterate().clone();
        let p_z = report.final_value();
        let step = build_feasible_region(problem, mode, z.as_slice()).and_then(|region| {
            report.warnings.extend(region.warnings.iter().cloned());
            solve_at(problem, config, &region)
        });
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                report.status = ScvxStatus::Failed {
                    reason: format!("succession {}: {e}", report.subproblem_solves + 1),
                };
                break;
            }
        };
        report.subproblem_solves += 1;
        report.subsolver_stats.push(step.stat);
        if config.keep_programs {
            report.programs.push(step.program);
        }
        report.dyn_multipliers = step.extracted.dyn_multipliers;
        let p_next = step.extracted.objective_value;
        if p_z - p_next < config.epsilon {
            report.fixed_point_residual = Some(p_z - p_next);
            report.status = ScvxStatus::Converged;
            break;
        }
        if report.successions == config.max_successions {
            break;
        }
        let y = step.extracted.z_next;
        report.feasibility_margins.push(margin(problem, mode, y.as_slice())?);
        report.base_violations.push(problem.base_set.violation(y.as_slice()));
        report.penalty_values.push(p_next);
        report.iterates.push(y);
        report.successions += 1;
    }

    let z_star = report.final_iterate().as_slice();
    report.dynamics_l1 = problem.eval_g(z_star)?.iter().map(|v| v.abs()).sum();
    report.weight_check = validate_penalty_weight(&config.penalty, &report.dyn_multipliers);
    report.penalty_exact = mode == PenaltyMode::Equality || report.dynamics_l1 <= PENALTY_EXACT_TOL;
    if !report.penalty_exact {
        report.warnings.push(format!(
            "penalty not exact at this λ: ‖g(z*)‖₁ = {:.3e}",
            report.dynamics_l1
        ));
    }
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// `P(z*) − Φ(z*)` with `Φ(z) = min { P(y) | y ∈ F_z }`.
pub fn fixed_point_residual(problem: &OptimalControlProblem, z_star: &StackedVariable, config: &ScvxConfig) -> Result<f64> {
    let mode = config.penalty.mode;
    let region = build_feasible_region(problem, mode, z_star.as_slice())?;
    let step = solve_at(problem, config, &region)?;
    Ok(penalty_value(problem, &config.penalty, z_star.as_slice())? - step.extracted.objective_value)
}

/// `min P` over `Y` and the dynamics rows alone, with every linearized
/// constraint dropped. A lower bound on `P` over `F`.
pub fn convex_relaxation(problem: &OptimalControlProblem, config: &ScvxConfig) -> Result<(f64, StackedVariable)> {
    let region = FeasibleRegion {
        anchor: vec![0.0; problem.dims.n_y()],
        mode: config.penalty.mode,
        halfspaces: Vec::new(),
        warnings: Vec::new(),
    };
    let step = solve_at(problem, config, &region)?;
    Ok((step.extracted.objective_value, step.extracted.z_next))
}

/// Trust-region schedule of the feasibility initializer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionSchedule {
    /// Initial `‖y − yᵏ‖∞` bound; `None` uses the widest coordinate range
    /// of `Y`.
    pub initial_radius: Option<f64>,
    pub min_radius: f64,
    /// Non-improving iterations tolerated before giving up.
    pub max_stall: usize,
    pub max_iterations: usize,
    /// A step must cut the violation by this fraction to count as progress.
    pub min_decrease: f64,
}

impl Default for TrustRegionSchedule {
    fn default() -> Self {
        Self {
            initial_radius: None,
            min_radius: 1e-9,
            max_stall: 20,
            max_iterations: 200,
            min_decrease: 1e-6,
        }
    }
}

/// Feasibility slack at or below this counts as zero.
pub const SLACK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleStart {
    pub point: StackedVariable,
    /// Cone programs solved.
    pub solves: usize,
    pub violation_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

fn violation(problem: &OptimalControlProblem, mode: PenaltyMode, y: &[f64]) -> Result<f64> {
    let q = problem.eval_q(y)?;
    let mut v: f64 = q[linearized_constraints(problem, mode)]
        .iter()
        .map(|x| (-x).max(0.0))
        .sum();
    if mode == PenaltyMode::Equality {
        v += q[..problem.dims.num_dynamics()].iter().map(|x| x.abs()).sum::<f64>();
    }
    Ok(v)
}

fn is_feasible(problem: &OptimalControlProblem, mode: PenaltyMode, y: &[f64]) -> bool {
    check_anchor(problem, mode, y).is_ok()
}

/// Constraints depending on pinned coordinates only cannot be repaired.
fn pinned_violation(problem: &OptimalControlProblem, mode: PenaltyMode, y: &[f64]) -> Option<String> {
    let bounds = problem.bounds();
    for j in linearized_constraints(problem, mode) {
        let spec = &problem.constraints()[j];
        if !spec.indices.iter().all(|&i| bounds[i].0 == bounds[i].1) {
            continue;
        }
        let mut w = y.to_vec();
        for &i in &spec.indices {
            w[i] = bounds[i].0;
        }
        let v = spec.eval(&w);
        if v < -ANCHOR_TOL {
            return Some(format!(
                "constraint {j} (step {}, component {}) is violated by pinned values: q = {v:.3e}",
                spec.step, spec.component
            ));
        }
    }
    None
}

/// Slack-minimizing trust-region loop that returns a point of `F`.
///
/// Each iteration linearizes every violated-or-active constraint at the
/// nearest boundary point of its keep-out set, relaxes those rows by
/// nonnegative slacks and minimizes their sum over `Y`, the dynamics rows
/// and the trust-region box.
pub fn find_feasible_start(
    problem: &OptimalControlProblem,
    mode: PenaltyMode,
    init_guess: &StackedVariable,
    schedule: &TrustRegionSchedule,
    solver: &SolverSettings,
) -> Result<FeasibleStart> {
    let n_y = problem.dims.n_y();
    if init_guess.len() != n_y {
        return Err(ScvxError::Dimension(format!("initial guess has length {}", init_guess.len())));
    }
    let mut y = init_guess.0.clone();
    let mut out = FeasibleStart {
        point: init_guess.clone(),
        solves: 0,
        violation_trace: Vec::new(),
        warnings: Vec::new(),
    };
    if is_feasible(problem, mode, &y) {
        return Ok(out);
    }
    if let Some(msg) = pinned_violation(problem, mode, &y) {
        return Err(ScvxError::InfeasibleScenario(msg));
    }
    let widest = problem
        .bounds()
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let max_radius = widest;
    let mut radius = schedule.initial_radius.unwrap_or(widest);
    let mut current = violation(problem, mode, &y)?;
    out.violation_trace.push(current);
    let mut stall = 0;

    for _ in 0..schedule.max_iterations {
        let mut pb = ProgramBuilder::new();
        let cols: Vec<usize> = pb.add_columns(n_y).collect();
        problem.base_set.encode(&mut pb, &cols);
        if mode == PenaltyMode::Equality {
            pb.add_zero(&dynamics_exprs(problem, &cols));
        }
        let lin = linearized_constraints(problem, mode);
        let slacks = pb.add_columns(lin.len());
        let mut rows = Vec::with_capacity(lin.len());
        for (k, j) in lin.clone().enumerate() {
            let spec = &problem.constraints()[j];
            let bp = nearest_boundary_point(spec, &y)?;
            out.warnings.extend(bp.warning);
            let pl = spec.local(&bp.point);
            let grad = spec
                .func
                .grad(&pl)
                .map_err(|norm| ScvxError::Licq { index: j, norm })?;
            // q_j(p) + ∇q_j(p)(y − p) + σ ≥ 0
            let mut e = LinExpr::constant(spec.func.eval(&pl) - grad.iter().zip(&pl).map(|(a, b)| a * b).sum::<f64>());
            for (&i, g) in spec.indices.iter().zip(&grad) {
                e = e.term(i, *g);
            }
            rows.push(e.term(slacks.start + k, 1.0));
            pb.add_cost(slacks.start + k, 1.0);
        }
        pb.add_nonneg(&rows);
        let sl: Vec<LinExpr> = slacks.clone().map(LinExpr::var).collect();
        pb.add_nonneg(&sl);
        let mut boxr = Vec::with_capacity(2 * n_y);
        for (i, &c) in cols.iter().enumerate() {
            boxr.push(LinExpr::var(c).plus_constant(radius - y[i]));
            boxr.push(LinExpr::constant(radius + y[i]).term(c, -1.0));
        }
        pb.add_nonneg(&boxr);
        let program = pb.build();
        let sol = conic::solve(&program, solver)?;
        out.solves += 1;

        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::PrimalInfeasible if radius < max_radius => {
                radius = (2.0 * radius).min(max_radius);
                continue;
            }
            SolveStatus::PrimalInfeasible => {
                return Err(ScvxError::InfeasibleScenario(
                    "base set and dynamics admit no trajectory".into(),
                ));
            }
            status => {
                return Err(ScvxError::Solver {
                    status,
                    iterations: sol.iterations,
                    context: "feasibility initializer".into(),
                })
            }
        }
        let candidate = sol.x[..n_y].to_vec();
        if is_feasible(problem, mode, &candidate) {
            out.violation_trace.push(0.0);
            out.point = StackedVariable(candidate);
            return Ok(out);
        }
        let v = violation(problem, mode, &candidate)?;
        if v < current * (1.0 - schedule.min_decrease) {
            y = candidate;
            current = v;
            out.violation_trace.push(v);
            radius = (2.0 * radius).min(max_radius);
            stall = 0;
        } else {
            radius *= 0.5;
            stall += 1;
        }
        if stall >= schedule.max_stall || radius < schedule.min_radius {
            break;
        }
    }
    Err(ScvxError::InfeasibleScenario(format!(
        "constraint violation stalled at {current:.3e} (tolerance {SLACK_TOL:.0e}, equality tolerance {ANCHOR_EQ_TOL:.0e})"
    )))
}
