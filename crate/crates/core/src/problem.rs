//! Discrete optimal control problem over a stacked decision vector.
//!
//! The decision vector is `y = (x_0, …, x_{T−1}, u_0, …, u_{T−2})`. All
//! constraints of the non-convex part are collected in one vector
//! `q(y) = (g(y), h(y))` with `q(y) ≥ 0` meaning feasible:
//!
//! * `g_{i,j}(y) = f_j(x_i, u_i) − x_{i+1,j} + x_{i,j}`, step-major then
//!   component-minor, `i = 0..T−1`;
//! * `h_{i,k}(y) = h_k(x_i)`, step-major, `i = 0..T`.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{LinExpr, ProgramBuilder};
use crate::convex_fn::{ConvexFn, ProjectorKind};
use crate::error::{Result, ScvxError};

/// Midpoint slack allowed by the sampled convexity check.
pub const CONVEXITY_TOL: f64 = 1e-9;
const CONVEXITY_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n: usize,
    pub m: usize,
    /// Number of temporal points.
    pub t: usize,
    /// State constraints per step.
    pub s: usize,
}

impl ProblemDims {
    pub fn new(n: usize, m: usize, t: usize, s: usize) -> Result<Self> {
        if n == 0 || m == 0 || t < 2 {
            return Err(ScvxError::InvalidProblem(format!(
                "need n ≥ 1, m ≥ 1, T ≥ 2 (got n={n}, m={m}, T={t})"
            )));
        }
        Ok(Self { n, m, t, s })
    }

    pub fn n_y(&self) -> usize {
        self.m * (self.t - 1) + self.n * self.t
    }

    pub fn num_dynamics(&self) -> usize {
        self.n * (self.t - 1)
    }

    pub fn num_state_constraints(&self) -> usize {
        self.s * self.t
    }

    /// `M = sT + n(T−1)`.
    pub fn num_constraints(&self) -> usize {
        self.num_state_constraints() + self.num_dynamics()
    }

    pub fn state_range(&self, i: usize) -> Range<usize> {
        i * self.n..(i + 1) * self.n
    }

    pub fn control_range(&self, i: usize) -> Range<usize> {
        let o = self.n * self.t;
        o + i * self.m..o + (i + 1) * self.m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StackedVariable(pub Vec<f64>);

impl StackedVariable {
    pub fn stack(dims: &ProblemDims, states: &[Vec<f64>], controls: &[Vec<f64>]) -> Result<Self> {
        if states.len() != dims.t {
            return Err(ScvxError::Dimension(format!("expected {} states, got {}", dims.t, states.len())));
        }
        if controls.len() != dims.t - 1 {
            return Err(ScvxError::Dimension(format!(
                "expected {} controls, got {}",
                dims.t - 1,
                controls.len()
            )));
        }
        let mut y = Vec::with_capacity(dims.n_y());
        for (i, x) in states.iter().enumerate() {
            if x.len() != dims.n {
                return Err(ScvxError::Dimension(format!("state {i} has length {}, expected {}", x.len(), dims.n)));
            }
            y.extend_from_slice(x);
        }
        for (i, u) in controls.iter().enumerate() {
            if u.len() != dims.m {
                return Err(ScvxError::Dimension(format!(
                    "control {i} has length {}, expected {}",
                    u.len(),
                    dims.m
                )));
            }
            y.extend_from_slice(u);
        }
        Ok(Self(y))
    }

    pub fn unstack(&self, dims: &ProblemDims) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let states = (0..dims.t).map(|i| self.state(dims, i).to_vec()).collect();
        let controls = (0..dims.t - 1).map(|i| self.control(dims, i).to_vec()).collect();
        (states, controls)
    }

    pub fn state(&self, dims: &ProblemDims, i: usize) -> &[f64] {
        &self.0[dims.state_range(i)]
    }

    pub fn control(&self, dims: &ProblemDims, i: usize) -> &[f64] {
        &self.0[dims.control_range(i)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Member of the base convex set `Y`; indices address the stacked vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaseConstraint {
    Bounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    /// `‖y[indices] − center‖ ≤ radius`
    NormBall {
        indices: Vec<usize>,
        center: Vec<f64>,
        radius: f64,
    },
    /// `axisᵀv ≥ ‖v‖ cos(half_angle)` for `v = y[indices]`.
    ThrustCone {
        indices: Vec<usize>,
        axis: Vec<f64>,
        half_angle: f64,
    },
    Pin {
        index: usize,
        value: f64,
    },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the complement of the unit vector `axis`.
pub(crate) fn complement_basis(axis: &[f64]) -> Vec<Vec<f64>> {
    let d = axis.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    let mut order: Vec<usize> = (0..d).collect();
    // start from the coordinate directions least aligned with the axis
    order.sort_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()));
    for k in order {
        if basis.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for _ in 0..2 {
            let p = dot(&v, axis);
            v.iter_mut().zip(axis).for_each(|(x, a)| *x -= p * a);
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, a)| *x -= p * a);
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    basis
}

impl BaseConstraint {
    fn validate(&self, n_y: usize) -> Result<()> {
        let bad = |msg: String| Err(ScvxError::InvalidProblem(msg));
        let check_idx = |idx: &[usize]| idx.iter().all(|&i| i < n_y);
        match self {
            BaseConstraint::Bounds { index, lower, upper } => {
                if *index >= n_y || !(lower <= upper) {
                    return bad(format!("bounds [{lower}, {upper}] on index {index}"));
                }
            }
            BaseConstraint::NormBall {
                indices,
                center,
                radius,
            } => {
                if indices.is_empty() || !check_idx(indices) || center.len() != indices.len() || !(*radius >= 0.0) {
                    return bad(format!("norm ball over {indices:?} with radius {radius}"));
                }
            }
            BaseConstraint::ThrustCone {
                indices,
                axis,
                half_angle,
            } => {
                if indices.len() < 2 || !check_idx(indices) || axis.len() != indices.len() {
                    return bad(format!("cone over {indices:?}"));
                }
                if (norm(axis) - 1.0).abs() > 1e-9 {
                    return bad("cone axis must be a unit vector".into());
                }
                if !(*half_angle > 0.0 && *half_angle < std::f64::consts::FRAC_PI_2) {
                    return bad(format!("cone half-angle {half_angle} rad outside (0, π/2)"));
                }
            }
            BaseConstraint::Pin { index, value } => {
                if *index >= n_y || !value.is_finite() {
                    return bad(format!("pin {value} on index {index}"));
                }
            }
        }
        Ok(())
    }

    /// Positive when `y` lies outside.
    pub fn violation(&self, y: &[f64]) -> f64 {
        match self {
            BaseConstraint::Bounds { index, lower, upper } => (lower - y[*index]).max(y[*index] - upper),
            BaseConstraint::NormBall {
                indices,
                center,
                radius,
            } => {
                let d: Vec<f64> = indices.iter().zip(center).map(|(&i, c)| y[i] - c).collect();
                norm(&d) - radius
            }
            BaseConstraint::ThrustCone {
                indices,
                axis,
                half_angle,
            } => {
                let v: Vec<f64> = indices.iter().map(|&i| y[i]).collect();
                norm(&v) * half_angle.cos() - dot(axis, &v)
            }
            BaseConstraint::Pin { index, value } => (y[*index] - value).abs(),
        }
    }

    /// Adds this member's cone rows; `cols[k]` is the program column of `y_k`.
    pub fn encode(&self, pb: &mut ProgramBuilder, cols: &[usize]) -> Range<usize> {
        match self {
            BaseConstraint::Bounds { index, lower, upper } => {
                let c = cols[*index];
                let mut rows = Vec::new();
                if lower.is_finite() {
                    rows.push(LinExpr::var(c).plus_constant(-lower));
                }
                if upper.is_finite() {
                    rows.push(LinExpr::constant(*upper).term(c, -1.0));
                }
                pb.add_nonneg(&rows)
            }
            BaseConstraint::NormBall {
                indices,
                center,
                radius,
            } => {
                let mut rows = vec![LinExpr::constant(*radius)];
                for (&i, c) in indices.iter().zip(center) {
                    rows.push(LinExpr::var(cols[i]).plus_constant(-c));
                }
                pb.add_soc(&rows)
            }
            BaseConstraint::ThrustCone {
                indices,
                axis,
                half_angle,
            } => {
                // tanθ · axisᵀv ≥ ‖P v‖ with P spanning the axis complement
                let tan = half_angle.tan();
                let mut head = LinExpr::default();
                for (&i, a) in indices.iter().zip(axis) {
                    head = head.term(cols[i], tan * a);
                }
                let mut rows = vec![head];
                for b in complement_basis(axis) {
                    let mut e = LinExpr::default();
                    for (&i, bk) in indices.iter().zip(&b) {
                        e = e.term(cols[i], *bk);
                    }
                    rows.push(e);
                }
                pb.add_soc(&rows)
            }
            BaseConstraint::Pin { index, value } => pb.add_zero(&[LinExpr::var(cols[*index]).plus_constant(-value)]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaseSet {
    pub members: Vec<BaseConstraint>,
}

impl BaseSet {
    pub fn new(members: Vec<BaseConstraint>) -> Self {
        Self { members }
    }

    pub fn push(&mut self, c: BaseConstraint) {
        self.members.push(c);
    }

    pub fn validate(&self, n_y: usize) -> Result<()> {
        self.members.iter().try_for_each(|c| c.validate(n_y))
    }

    /// Per-coordinate bounds implied by the description. Errors when some
    /// coordinate is unbounded, i.e. the set is not compact.
    pub fn bounding_box(&self, n_y: usize) -> Result<Vec<(f64, f64)>> {
        let mut bx = vec![(f64::NEG_INFINITY, f64::INFINITY); n_y];
        let mut tighten = |i: usize, lo: f64, hi: f64| {
            bx[i].0 = bx[i].0.max(lo);
            bx[i].1 = bx[i].1.min(hi);
        };
        for c in &self.members {
            match c {
                BaseConstraint::Bounds { index, lower, upper } => tighten(*index, *lower, *upper),
                BaseConstraint::NormBall {
                    indices,
                    center,
                    radius,
                } => {
                    for (&i, c) in indices.iter().zip(center) {
                        tighten(i, c - radius, c + radius);
                    }
                }
                BaseConstraint::ThrustCone { .. } => {}
                BaseConstraint::Pin { index, value } => tighten(*index, *value, *value),
            }
        }
        if let Some(i) = bx.iter().position(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
            return Err(ScvxError::InvalidProblem(format!(
                "base set is not compact: coordinate {i} has no finite bounds"
            )));
        }
        if let Some(i) = bx.iter().position(|(lo, hi)| lo > hi) {
            return Err(ScvxError::InvalidProblem(format!("base set is empty along coordinate {i}")));
        }
        Ok(bx)
    }

    /// Largest member violation (≤ 0 inside).
    pub fn violation(&self, y: &[f64]) -> f64 {
        self.members
            .iter()
            .map(|c| c.violation(y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.violation(y) <= tol
    }

    pub fn encode(&self, pb: &mut ProgramBuilder, cols: &[usize]) -> Vec<Range<usize>> {
        self.members.iter().map(|c| c.encode(pb, cols)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StageCost {
    /// `Σ ‖u_i‖₂`
    ControlNorm,
    /// One unit per step: `T − 1`.
    Unit,
    /// `Σ_i ½ Σ_k w_k x_{i,k}² + Σ_i ½ Σ_k r_k u_{i,k}²`, weights ≥ 0.
    Quadratic {
        state_weights: Vec<f64>,
        control_weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub stage: StageCost,
    /// Constant added to the stage sum.
    pub offset: f64,
}

impl Objective {
    pub fn control_norm() -> Self {
        Self {
            stage: StageCost::ControlNorm,
            offset: 0.0,
        }
    }

    pub fn value(&self, dims: &ProblemDims, y: &[f64]) -> f64 {
        let y = StackedVariable(y.to_vec());
        let stage = match &self.stage {
            StageCost::ControlNorm => (0..dims.t - 1).map(|i| norm(y.control(dims, i))).sum(),
            StageCost::Unit => (dims.t - 1) as f64,
            StageCost::Quadratic {
                state_weights,
                control_weights,
            } => {
                let wsum = |w: &[f64], v: &[f64]| 0.5 * w.iter().zip(v).map(|(a, b)| a * b * b).sum::<f64>();
                let xs: f64 = (0..dims.t).map(|i| wsum(state_weights, y.state(dims, i))).sum();
                let us: f64 = (0..dims.t - 1).map(|i| wsum(control_weights, y.control(dims, i))).sum();
                xs + us
            }
        };
        stage + self.offset
    }

    fn validate(&self, dims: &ProblemDims) -> Result<()> {
        if let StageCost::Quadratic {
            state_weights,
            control_weights,
        } = &self.stage
        {
            if state_weights.len() != dims.n || control_weights.len() != dims.m {
                return Err(ScvxError::Dimension("quadratic cost weight lengths".into()));
            }
            if state_weights.iter().chain(control_weights).any(|w| !(*w >= 0.0)) {
                return Err(ScvxError::InvalidProblem("quadratic cost weights must be ≥ 0".into()));
            }
        }
        if !self.offset.is_finite() {
            return Err(ScvxError::InvalidProblem("objective offset is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    DynamicsDefect,
    StateConstraint,
}

/// One scalar constraint `q_j(y) ≥ 0`, a convex function of the few
/// coordinates `indices` of `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub step: usize,
    pub component: usize,
    /// `func` sees `w = y[indices]`.
    pub indices: Vec<usize>,
    pub func: ConvexFn,
}

impl ConstraintSpec {
    pub fn local(&self, y: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| y[i]).collect()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.func.eval(&self.local(y))
    }

    /// Gradient with respect to `y[indices]`.
    pub fn grad_local(&self, y: &[f64]) -> Result<Vec<f64>, f64> {
        self.func.grad(&self.local(y))
    }

    pub fn grad_dense(&self, y: &[f64]) -> Result<Vec<f64>, f64> {
        let gl = self.grad_local(y)?;
        let mut g = vec![0.0; y.len()];
        for (&i, v) in self.indices.iter().zip(gl) {
            g[i] += v;
        }
        Ok(g)
    }

    pub fn projector_kind(&self) -> ProjectorKind {
        self.func.projector_kind()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalControlProblem {
    pub dims: ProblemDims,
    /// `f_j(x, u)` over `(x, u) ∈ R^{n+m}`, one per state component.
    pub dynamics: Vec<ConvexFn>,
    /// `h_k(x)` over `R^n`, applied at every step.
    pub state_constraints: Vec<ConvexFn>,
    pub base_set: BaseSet,
    pub objective: Objective,
    constraints: Vec<ConstraintSpec>,
    bounds: Vec<(f64, f64)>,
}

impl OptimalControlProblem {
    pub fn new(
        dims: ProblemDims,
        dynamics: Vec<ConvexFn>,
        state_constraints: Vec<ConvexFn>,
        base_set: BaseSet,
        objective: Objective,
    ) -> Result<Self> {
        if dynamics.len() != dims.n {
            return Err(ScvxError::Dimension(format!(
                "{} dynamics components for state dimension {}",
                dynamics.len(),
                dims.n
            )));
        }
        if state_constraints.len() != dims.s {
            return Err(ScvxError::Dimension(format!(
                "{} state constraints, dims say {}",
                state_constraints.len(),
                dims.s
            )));
        }
        for (j, f) in dynamics.iter().enumerate() {
            if f.dim() != dims.n + dims.m {
                return Err(ScvxError::Dimension(format!("dynamics component {j} has domain {}", f.dim())));
            }
            f.validate()
                .map_err(|e| ScvxError::InvalidProblem(format!("dynamics component {j}: {e}")))?;
        }
        for (k, h) in state_constraints.iter().enumerate() {
            if h.dim() != dims.n {
                return Err(ScvxError::Dimension(format!("state constraint {k} has domain {}", h.dim())));
            }
            h.validate()
                .map_err(|e| ScvxError::InvalidProblem(format!("state constraint {k}: {e}")))?;
        }
        base_set.validate(dims.n_y())?;
        let bounds = base_set.bounding_box(dims.n_y())?;
        objective.validate(&dims)?;

        let mut constraints = Vec::with_capacity(dims.num_constraints());
        let (n, m) = (dims.n, dims.m);
        for i in 0..dims.t - 1 {
            for (j, f) in dynamics.iter().enumerate() {
                let mut indices: Vec<usize> = dims.state_range(i).chain(dims.control_range(i)).collect();
                indices.push(dims.state_range(i + 1).start + j);
                let mut func = f.embed(n + m + 1, &(0..n + m).collect::<Vec<_>>());
                func.linear[j] += 1.0;
                func.linear[n + m] -= 1.0;
                constraints.push(ConstraintSpec {
                    kind: ConstraintKind::DynamicsDefect,
                    step: i,
                    component: j,
                    indices,
                    func,
                });
            }
        }
        for i in 0..dims.t {
            for (k, h) in state_constraints.iter().enumerate() {
                constraints.push(ConstraintSpec {
                    kind: ConstraintKind::StateConstraint,
                    step: i,
                    component: k,
                    indices: dims.state_range(i).collect(),
                    func: h.clone(),
                });
            }
        }

        let problem = Self {
            dims,
            dynamics,
            state_constraints,
            base_set,
            objective,
            constraints,
            bounds,
        };
        problem.check_convexity(CONVEXITY_SAMPLES, 0x5eed)?;
        Ok(problem)
    }

    pub fn constraints(&self) -> &[ConstraintSpec] {
        &self.constraints
    }

    /// Coordinate bounds implied by the base set.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dynamics_affine(&self) -> bool {
        self.dynamics.iter().all(ConvexFn::is_affine)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dims.n_y() {
            return Err(ScvxError::Dimension(format!(
                "y has length {}, expected {}",
                y.len(),
                self.dims.n_y()
            )));
        }
        Ok(())
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.value(&self.dims, y)
    }

    pub fn eval_g(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let k = self.dims.num_dynamics();
        Ok(self.constraints[..k].iter().map(|c| c.eval(y)).collect())
    }

    pub fn eval_h(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let k = self.dims.num_dynamics();
        Ok(self.constraints[k..].iter().map(|c| c.eval(y)).collect())
    }

    pub fn eval_q(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        Ok(self.constraints.iter().map(|c| c.eval(y)).collect())
    }

    pub fn jacobian_q(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(y)?;
        let mut jac = DMatrix::zeros(self.constraints.len(), y.len());
        for (r, c) in self.constraints.iter().enumerate() {
            let g = c
                .grad_local(y)
                .map_err(|norm| ScvxError::Singularity { index: r, norm })?;
            for (&i, v) in c.indices.iter().zip(g) {
                jac[(r, i)] += v;
            }
        }
        Ok(jac)
    }

    /// Draws a point uniformly from the bounding box of `Y`.
    pub fn sample_box<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
            .collect()
    }

    /// Midpoint inequality for every constraint on `samples` random pairs
    /// from the bounding box of `Y`.
    pub fn check_convexity(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let a = self.sample_box(&mut rng);
            let b = self.sample_box(&mut rng);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            for (j, c) in self.constraints.iter().enumerate() {
                let excess = c.eval(&mid) - 0.5 * (c.eval(&a) + c.eval(&b));
                if excess > CONVEXITY_TOL * (1.0 + c.eval(&mid).abs()) {
                    return Err(ScvxError::NotConvex {
                        what: format!("constraint {j} ({:?}, step {}, component {})", c.kind, c.step, c.component),
                        excess,
                    });
                }
            }
        }
        Ok(())
    }
}
