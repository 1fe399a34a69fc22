//! Euclidean projection onto the sublevel sets `{y : q_j(y) ≤ 0}`.
//!
//! Each constraint touches only `y[indices]`, so projections are computed on
//! that local vector and the remaining coordinates are copied through.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::conic::{self, LinExpr, ProgramBuilder, SolveStatus, SolverSettings};
use crate::convex_fn::{ConvexFn, Curvature, ProjectorKind};
use crate::error::{Result, ScvxError};
use crate::problem::ConstraintSpec;

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMethod {
    Analytic,
    Conic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    pub distance: f64,
    pub on_boundary: bool,
    pub method: ProjectionMethod,
    /// Set when a degenerate configuration forced a fallback choice.
    pub warning: Option<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn empty_set(f: &ConvexFn) -> ScvxError {
    ScvxError::InvalidProblem(format!("sublevel set is empty (constant {})", f.constant))
}

/// Projection of `w` onto `{f ≤ 0}` with a closed form, or `None` if the
/// function has none.
pub fn project_local_analytic(f: &ConvexFn, w: &[f64]) -> Result<Option<Vec<f64>>> {
    match f.projector_kind() {
        ProjectorKind::Halfspace => {
            let v = f.eval(w);
            if v <= 0.0 {
                return Ok(Some(w.to_vec()));
            }
            let a = &f.linear;
            let k = v / dot(a, a);
            Ok(Some(w.iter().zip(a).map(|(x, ai)| x - k * ai).collect()))
        }
        ProjectorKind::Ball | ProjectorKind::Cylinder => {
            let Curvature::Norm { h, center } = &f.curvature else {
                unreachable!()
            };
            let r = -f.constant;
            if r < 0.0 {
                return Err(empty_set(f));
            }
            let p: Vec<f64> = h.iter().map(|row| dot(row, w)).collect();
            let d: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
            let nd = norm(&d);
            if nd <= r {
                return Ok(Some(w.to_vec()));
            }
            // w + Hᵀ(center + r d/‖d‖ − p)
            let shift: Vec<f64> = d.iter().map(|di| di * (r / nd - 1.0)).collect();
            let mut out = w.to_vec();
            for (row, s) in h.iter().zip(&shift) {
                for (o, hk) in out.iter_mut().zip(row) {
                    *o += hk * s;
                }
            }
            Ok(Some(out))
        }
        ProjectorKind::None => Ok(None),
    }
}

fn finish(z: &[f64], spec: &ConstraintSpec, local: Vec<f64>, method: ProjectionMethod, warning: Option<String>) -> ProjectionResult {
    let mut point = z.to_vec();
    for (&i, v) in spec.indices.iter().zip(&local) {
        point[i] = *v;
    }
    let distance = dist(&point, z);
    ProjectionResult {
        on_boundary: spec.eval(z) > 0.0,
        point,
        distance,
        method,
        warning,
    }
}

/// Projects `z` onto `{y : q_j(y) ≤ 0}`, analytically when the constraint
/// kind allows it.
pub fn project(spec: &ConstraintSpec, z: &[f64]) -> Result<ProjectionResult> {
    let w = spec.local(z);
    match project_local_analytic(&spec.func, &w)? {
        Some(local) => Ok(finish(z, spec, local, ProjectionMethod::Analytic, None)),
        None => project_generic(spec, z, DEFAULT_PROJECTION_TOL),
    }
}

/// Solves `min ‖y − z‖ s.t. q_j(y) ≤ 0` as a small cone program.
pub fn project_generic(spec: &ConstraintSpec, z: &[f64], tol: f64) -> Result<ProjectionResult> {
    let w = spec.local(z);
    let local = project_local_conic(&spec.func, &w, tol)?;
    Ok(finish(z, spec, local, ProjectionMethod::Conic, None))
}

/// Appends the rows of `f(w) ≤ 0` with `w` in columns `cols`.
pub(crate) fn encode_sublevel(pb: &mut ProgramBuilder, f: &ConvexFn, cols: &[usize]) -> Result<()> {
    // s = −(aᵀw + c)
    let slack = f.affine_expr(cols).scaled(-1.0);
    match &f.curvature {
        Curvature::None => {
            pb.add_nonneg(&[slack]);
        }
        Curvature::Norm { h, center } => {
            let mut rows = vec![slack];
            for (row, c) in h.iter().zip(center) {
                let mut e = LinExpr::constant(-c);
                for (&col, v) in cols.iter().zip(row) {
                    e = e.term(col, *v);
                }
                rows.push(e);
            }
            pb.add_soc(&rows);
        }
        Curvature::Quadratic { p } => {
            // ½‖Lw‖² ≤ s  ⇔  (s + ½, s − ½, Lw) ∈ SOC, with P = LᵀL
            let d = cols.len();
            let mat = DMatrix::from_fn(d, d, |i, j| p[i][j]);
            let eig = SymmetricEigen::new(mat);
            let top = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let mut rows = vec![slack.clone().plus_constant(0.5), slack.plus_constant(-0.5)];
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam < -1e-10 * top.max(1.0) {
                    return Err(ScvxError::NotConvex {
                        what: "quadratic term".into(),
                        excess: -lam,
                    });
                }
                if lam <= 1e-14 * top {
                    continue;
                }
                let s = lam.sqrt();
                let mut e = LinExpr::default();
                for (i, &col) in cols.iter().enumerate() {
                    e = e.term(col, s * eig.eigenvectors[(i, k)]);
                }
                rows.push(e);
            }
            pb.add_soc(&rows);
        }
    }
    Ok(())
}

fn project_local_conic(f: &ConvexFn, w: &[f64], tol: f64) -> Result<Vec<f64>> {
    if f.eval(w) <= 0.0 {
        return Ok(w.to_vec());
    }
    let d = w.len();
    let mut pb = ProgramBuilder::new();
    let cols: Vec<usize> = pb.add_columns(d).collect();
    let t = pb.add_columns(1).start;
    pb.add_cost(t, 1.0);
    let mut cone = vec![LinExpr::var(t)];
    for (&c, wi) in cols.iter().zip(w) {
        cone.push(LinExpr::var(c).plus_constant(-wi));
    }
    pb.add_soc(&cone);
    encode_sublevel(&mut pb, f, &cols)?;
    let program = pb.build();
    let settings = SolverSettings {
        tol,
        ..SolverSettings::default()
    };
    let sol = conic::solve(&program, &settings)?;
    if sol.status != SolveStatus::Optimal {
        return Err(ScvxError::Solver {
            status: sol.status,
            iterations: sol.iterations,
            context: format!("generic projection, residuals {:?}", sol.residuals),
        });
    }
    Ok(polish(f, sol.x[..d].to_vec(), w))
}

/// Moves a solver point exactly onto the boundary: a few gradient steps
/// until `f ≤ 0`, then bisection along the segment towards `z`.
fn polish(f: &ConvexFn, mut w: Vec<f64>, z: &[f64]) -> Vec<f64> {
    for _ in 0..20 {
        let v = f.eval(&w);
        if v <= 0.0 {
            break;
        }
        let Ok(g) = f.grad(&w) else { break };
        let gg = dot(&g, &g);
        if gg == 0.0 {
            break;
        }
        let k = v / gg * (1.0 + 1e-12);
        w.iter_mut().zip(&g).for_each(|(x, gi)| *x -= k * gi);
    }
    if f.eval(&w) > 0.0 {
        return w;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let at = |s: f64| -> Vec<f64> { w.iter().zip(z).map(|(a, b)| a + s * (b - a)).collect() };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f.eval(&at(mid)) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Closest point on the boundary of `{q_j ≤ 0}` for points inside the set;
/// the projection for points outside.
///
/// For norm constraints a point exactly on the axis has no unique nearest
/// boundary point; the first row of `H` is used as the direction and a
/// warning is attached. Constraints without a closed form return `z`.
pub fn nearest_boundary_point(spec: &ConstraintSpec, z: &[f64]) -> Result<ProjectionResult> {
    let f = &spec.func;
    let w = spec.local(z);
    if f.eval(&w) > 0.0 {
        return project(spec, z);
    }
    match f.projector_kind() {
        ProjectorKind::Halfspace => {
            let a = &f.linear;
            let k = f.eval(&w) / dot(a, a);
            let local = w.iter().zip(a).map(|(x, ai)| x - k * ai).collect();
            Ok(finish(z, spec, local, ProjectionMethod::Analytic, None))
        }
        ProjectorKind::Ball | ProjectorKind::Cylinder => {
            let Curvature::Norm { h, center } = &f.curvature else {
                unreachable!()
            };
            let r = -f.constant;
            let p: Vec<f64> = h.iter().map(|row| dot(row, &w)).collect();
            let d: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
            let nd = norm(&d);
            let mut warning = None;
            let dir: Vec<f64> = if nd > crate::convex_fn::NORM_SINGULARITY_RADIUS {
                d.iter().map(|v| v / nd).collect()
            } else {
                warning = Some(format!(
                    "constraint at step {} component {}: point on the axis, fallback direction used",
                    spec.step, spec.component
                ));
                let mut e = vec![0.0; d.len()];
                e[0] = 1.0;
                e
            };
            let mut local = w.clone();
            for ((row, di), (pi, ci)) in h.iter().zip(&dir).zip(p.iter().zip(center)) {
                let s = ci + r * di - pi;
                for (o, hk) in local.iter_mut().zip(row) {
                    *o += hk * s;
                }
            }
            Ok(finish(z, spec, local, ProjectionMethod::Analytic, warning))
        }
        ProjectorKind::None => Ok(finish(z, spec, w, ProjectionMethod::Analytic, None)),
    }
}
