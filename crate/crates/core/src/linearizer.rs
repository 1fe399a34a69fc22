//! Convexified feasible region `F_z`: the base set plus one supporting
//! halfspace per linearized constraint,
//!
//! ```text
//! l_j(y, z) = ∇q_j(z̄_j) (y − z̄_j) ≥ 0,   z̄_j = proj_{q_j ≤ 0}(z).
//! ```
//!
//! In equality mode the (affine) dynamics defects are kept as equality rows
//! and only the state constraints are linearized.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{ConicProgram, LinExpr, ProgramBuilder};
use crate::error::{Result, ScvxError};
use crate::penalty::PenaltyMode;
use crate::problem::OptimalControlProblem;
use crate::projector::project;
use crate::sampler::HitAndRun;

/// Gradient norms at or below this violate the constraint qualification.
pub const LICQ_TOL: f64 = 1e-10;
/// `q_j(z) ≥ −ANCHOR_TOL` counts as feasible.
pub const ANCHOR_TOL: f64 = 1e-8;
/// Allowed equality-row and base-set violation of an anchor.
pub const ANCHOR_EQ_TOL: f64 = 1e-7;
/// Containment tolerance for sampled points of `F_z`.
pub const CONTAINMENT_TOL: f64 = 1e-8;

/// `normal · y ≥ offset`, i.e. `l_j(y) = normal · y − offset ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    /// Index into `q`.
    pub constraint: usize,
    pub normal: Vec<(usize, f64)>,
    pub offset: f64,
}

impl Halfspace {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.normal.iter().map(|(i, a)| a * y[*i]).sum::<f64>() - self.offset
    }

    pub fn normal_norm(&self) -> f64 {
        self.normal.iter().map(|(_, a)| a * a).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub anchor: Vec<f64>,
    pub mode: PenaltyMode,
    pub halfspaces: Vec<Halfspace>,
    pub warnings: Vec<String>,
}

/// Row ranges of a region inside a cone program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRows {
    pub base: Vec<Range<usize>>,
    /// Equality-mode dynamics rows (empty in penalty mode).
    pub dynamics: Range<usize>,
    pub halfspaces: Range<usize>,
}

/// Indices of `q` that go through project-and-linearize.
pub fn linearized_constraints(problem: &OptimalControlProblem, mode: PenaltyMode) -> Range<usize> {
    let m = problem.dims.num_constraints();
    match mode {
        PenaltyMode::Equality => problem.dims.num_dynamics()..m,
        PenaltyMode::Penalty => 0..m,
    }
}

/// Membership of `z` in `F`, with the anchor tolerances.
pub fn check_anchor(problem: &OptimalControlProblem, mode: PenaltyMode, z: &[f64]) -> Result<()> {
    let q = problem.eval_q(z)?;
    let lin = linearized_constraints(problem, mode);
    if let Some((j, v)) = q[lin.clone()]
        .iter()
        .enumerate()
        .map(|(k, v)| (lin.start + k, *v))
        .find(|(_, v)| *v < -ANCHOR_TOL)
    {
        return Err(ScvxError::InfeasibleAnchor {
            detail: format!("q[{j}] = {v:.3e}"),
        });
    }
    if mode == PenaltyMode::Equality {
        let worst = q[..problem.dims.num_dynamics()]
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        if worst > ANCHOR_EQ_TOL {
            return Err(ScvxError::InfeasibleAnchor {
                detail: format!("dynamics defect {worst:.3e}"),
            });
        }
    }
    let v = problem.base_set.violation(z);
    if v > ANCHOR_EQ_TOL {
        return Err(ScvxError::InfeasibleAnchor {
            detail: format!("base set violated by {v:.3e}"),
        });
    }
    Ok(())
}

/// Supporting halfspace of constraint `j` at the projection of `z`.
pub fn linearize(problem: &OptimalControlProblem, j: usize, z: &[f64]) -> Result<(Halfspace, Option<String>)> {
    let spec = &problem.constraints()[j];
    let proj = project(spec, z)?;
    let zl = spec.local(&proj.point);
    let grad = spec
        .func
        .grad(&zl)
        .map_err(|norm| ScvxError::Licq { index: j, norm })?;
    let h = Halfspace {
        constraint: j,
        offset: grad.iter().zip(&zl).map(|(a, b)| a * b).sum(),
        normal: spec.indices.iter().copied().zip(grad).collect(),
    };
    let norm = h.normal_norm();
    if norm <= LICQ_TOL {
        return Err(ScvxError::Licq { index: j, norm });
    }
    Ok((h, proj.warning))
}

pub fn build_feasible_region(problem: &OptimalControlProblem, mode: PenaltyMode, z: &[f64]) -> Result<FeasibleRegion> {
    check_anchor(problem, mode, z)?;
    let mut halfspaces = Vec::new();
    let mut warnings = Vec::new();
    for j in linearized_constraints(problem, mode) {
        let (h, w) = linearize(problem, j, z)?;
        halfspaces.push(h);
        warnings.extend(w);
    }
    Ok(FeasibleRegion {
        anchor: z.to_vec(),
        mode,
        halfspaces,
        warnings,
    })
}

/// Affine dynamics defects as expressions over the program columns.
pub(crate) fn dynamics_exprs(problem: &OptimalControlProblem, cols: &[usize]) -> Vec<LinExpr> {
    problem.constraints()[..problem.dims.num_dynamics()]
        .iter()
        .map(|c| {
            let local: Vec<usize> = c.indices.iter().map(|&i| cols[i]).collect();
            c.func.affine_expr(&local)
        })
        .collect()
}

impl FeasibleRegion {
    /// Smallest `l_j(z, z)`; nonnegative for a valid region.
    pub fn min_anchor_slack(&self) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.eval(&self.anchor))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, problem: &OptimalControlProblem, y: &[f64], tol: f64) -> bool {
        if !problem.base_set.contains(y, tol) || self.halfspaces.iter().any(|h| h.eval(y) < -tol) {
            return false;
        }
        if self.mode == PenaltyMode::Equality {
            let g = problem.eval_g(y).expect("length checked by caller");
            return g.iter().all(|v| v.abs() <= tol);
        }
        true
    }

    /// Appends base-set, dynamics and halfspace rows; `cols[k]` is the
    /// program column holding `y_k`.
    pub fn encode(&self, problem: &OptimalControlProblem, pb: &mut ProgramBuilder, cols: &[usize]) -> RegionRows {
        let base = problem.base_set.encode(pb, cols);
        let dynamics = match self.mode {
            PenaltyMode::Equality => pb.add_zero(&dynamics_exprs(problem, cols)),
            PenaltyMode::Penalty => pb.num_rows()..pb.num_rows(),
        };
        let rows: Vec<LinExpr> = self
            .halfspaces
            .iter()
            .map(|h| {
                let mut e = LinExpr::constant(-h.offset);
                for &(i, a) in &h.normal {
                    e = e.term(cols[i], a);
                }
                e
            })
            .collect();
        let halfspaces = pb.add_nonneg(&rows);
        RegionRows {
            base,
            dynamics,
            halfspaces,
        }
    }

    /// The region alone, over columns `y`, with zero cost.
    pub fn program(&self, problem: &OptimalControlProblem) -> ConicProgram {
        let mut pb = ProgramBuilder::new();
        let cols: Vec<usize> = pb.add_columns(problem.dims.n_y()).collect();
        self.encode(problem, &mut pb, &cols);
        pb.build()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub anchor_min_slack: f64,
    pub anchor_ok: bool,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `q_j` over all samples.
    pub worst_margin: f64,
}

/// Checks `z ∈ F_z` and samples `F_z` by hit-and-run, counting points with
/// some `q_j < −1e-8`.
pub fn verify_invariance(
    problem: &OptimalControlProblem,
    region: &FeasibleRegion,
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let anchor_min_slack = region.min_anchor_slack();
    let program = region.program(problem);
    let mut walk = HitAndRun::centered(&program)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..n_samples {
        let y = walk.step(&mut rng)?;
        let q = problem.eval_q(y)?;
        let lo = q[linearized_constraints(problem, region.mode)]
            .iter()
            .fold(f64::INFINITY, |a, v| a.min(*v));
        worst = worst.min(lo);
        if lo < -CONTAINMENT_TOL {
            violations += 1;
        }
    }
    Ok(InvarianceReport {
        anchor_min_slack,
        anchor_ok: anchor_min_slack >= -1e-9,
        samples: n_samples,
        violations,
        worst_margin: worst,
    })
}

/// `‖l(y, z1) − l(y, z2)‖ / ‖z1 − z2‖` over the linearized constraints.
pub fn lipschitz_probe(
    problem: &OptimalControlProblem,
    mode: PenaltyMode,
    z1: &[f64],
    z2: &[f64],
    y: &[f64],
) -> Result<f64> {
    let dz: f64 = z1.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if dz == 0.0 {
        return Err(ScvxError::InvalidProblem("probe points coincide".into()));
    }
    let r1 = build_feasible_region(problem, mode, z1)?;
    let r2 = build_feasible_region(problem, mode, z2)?;
    let dl: f64 = r1
        .halfspaces
        .iter()
        .zip(&r2.halfspaces)
        .map(|(a, b)| (a.eval(y) - b.eval(y)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(dl / dz)
}
