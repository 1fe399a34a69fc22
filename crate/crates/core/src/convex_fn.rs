//! Catalog of convex scalar functions that stay cone-representable:
//! `aᵀw + c + κ(w)` with `κ` zero, a Euclidean norm of an affine map, or a
//! convex quadratic.

use serde::{Deserialize, Serialize};

use crate::conic::LinExpr;

/// Gradients of `‖Hw − c‖` are refused inside this radius.
pub const NORM_SINGULARITY_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Curvature {
    None,
    /// `‖H w − center‖₂`; `h` is stored row-major.
    Norm { h: Vec<Vec<f64>>, center: Vec<f64> },
    /// `½ wᵀ P w` with `P` symmetric positive semidefinite.
    Quadratic { p: Vec<Vec<f64>> },
}

/// Which closed-form projector applies to the sublevel set `{w : f(w) ≤ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorKind {
    Halfspace,
    Ball,
    Cylinder,
    /// No closed form; solved as a small cone program.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexFn {
    pub linear: Vec<f64>,
    pub constant: f64,
    pub curvature: Curvature,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConvexFn {
    pub fn affine(linear: Vec<f64>, constant: f64) -> Self {
        Self {
            linear,
            constant,
            curvature: Curvature::None,
        }
    }

    /// `‖H w − center‖ − radius`.
    pub fn norm_minus_radius(h: Vec<Vec<f64>>, center: Vec<f64>, radius: f64) -> Self {
        let dim = h.first().map_or(0, Vec::len);
        Self {
            linear: vec![0.0; dim],
            constant: -radius,
            curvature: Curvature::Norm { h, center },
        }
    }

    /// `‖w − center‖ − radius`.
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let d = center.len();
        let h = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::norm_minus_radius(h, center, radius)
    }

    pub fn quadratic(p: Vec<Vec<f64>>, linear: Vec<f64>, constant: f64) -> Self {
        Self {
            linear,
            constant,
            curvature: Curvature::Quadratic { p },
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.curvature, Curvature::None)
    }

    pub fn validate(&self) -> Result<(), String> {
        let d = self.dim();
        match &self.curvature {
            Curvature::None => {}
            Curvature::Norm { h, center } => {
                if h.is_empty() || h.iter().any(|r| r.len() != d) || center.len() != h.len() {
                    return Err(format!("norm term shape mismatch for domain dimension {d}"));
                }
            }
            Curvature::Quadratic { p } => {
                if p.len() != d || p.iter().any(|r| r.len() != d) {
                    return Err(format!("quadratic term must be {d}x{d}"));
                }
                for i in 0..d {
                    for j in 0..i {
                        if (p[i][j] - p[j][i]).abs() > 1e-12 * (1.0 + p[i][j].abs()) {
                            return Err("quadratic term is not symmetric".into());
                        }
                    }
                }
            }
        }
        let finite = self.linear.iter().all(|v| v.is_finite()) && self.constant.is_finite();
        if !finite {
            return Err("non-finite coefficients".into());
        }
        Ok(())
    }

    fn norm_arg(h: &[Vec<f64>], center: &[f64], w: &[f64]) -> Vec<f64> {
        h.iter().zip(center).map(|(row, c)| dot(row, w) - c).collect()
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        let base = dot(&self.linear, w) + self.constant;
        base + match &self.curvature {
            Curvature::None => 0.0,
            Curvature::Norm { h, center } => {
                let r = Self::norm_arg(h, center, w);
                dot(&r, &r).sqrt()
            }
            Curvature::Quadratic { p } => {
                0.5 * p.iter().zip(w).map(|(row, wi)| wi * dot(row, w)).sum::<f64>()
            }
        }
    }

    /// Gradient at `w`; `Err(norm)` when a norm term is evaluated at its
    /// non-differentiable point.
    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>, f64> {
        let mut g = self.linear.clone();
        match &self.curvature {
            Curvature::None => {}
            Curvature::Norm { h, center } => {
                let r = Self::norm_arg(h, center, w);
                let nr = dot(&r, &r).sqrt();
                if nr < NORM_SINGULARITY_RADIUS {
                    return Err(nr);
                }
                for (row, ri) in h.iter().zip(&r) {
                    for (gk, hk) in g.iter_mut().zip(row) {
                        *gk += hk * ri / nr;
                    }
                }
            }
            Curvature::Quadratic { p } => {
                for (gk, row) in g.iter_mut().zip(p) {
                    *gk += dot(row, w);
                }
            }
        }
        Ok(g)
    }

    pub fn projector_kind(&self) -> ProjectorKind {
        match &self.curvature {
            Curvature::None => {
                if self.linear.iter().any(|v| *v != 0.0) {
                    ProjectorKind::Halfspace
                } else {
                    ProjectorKind::None
                }
            }
            Curvature::Norm { h, .. } => {
                if self.linear.iter().any(|v| *v != 0.0) || !rows_orthonormal(h) {
                    return ProjectorKind::None;
                }
                let square = h.len() == self.dim();
                if square {
                    ProjectorKind::Ball
                } else {
                    ProjectorKind::Cylinder
                }
            }
            Curvature::Quadratic { .. } => ProjectorKind::None,
        }
    }

    /// Re-expresses the function over a larger local vector: coordinate `k`
    /// of the old domain becomes coordinate `map[k]` of a domain of size
    /// `new_dim`.
    pub fn embed(&self, new_dim: usize, map: &[usize]) -> Self {
        assert_eq!(map.len(), self.dim());
        let spread = |v: &[f64]| {
            let mut out = vec![0.0; new_dim];
            for (k, &t) in map.iter().enumerate() {
                out[t] += v[k];
            }
            out
        };
        let curvature = match &self.curvature {
            Curvature::None => Curvature::None,
            Curvature::Norm { h, center } => Curvature::Norm {
                h: h.iter().map(|r| spread(r)).collect(),
                center: center.clone(),
            },
            Curvature::Quadratic { p } => {
                let mut q = vec![vec![0.0; new_dim]; new_dim];
                for (i, row) in p.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        q[map[i]][map[j]] += v;
                    }
                }
                Curvature::Quadratic { p: q }
            }
        };
        Self {
            linear: spread(&self.linear),
            constant: self.constant,
            curvature,
        }
    }

    /// Affine part as an expression over program columns `cols[k]`.
    pub fn affine_expr(&self, cols: &[usize]) -> LinExpr {
        let mut e = LinExpr::constant(self.constant);
        for (k, &c) in cols.iter().enumerate() {
            e = e.term(c, self.linear[k]);
        }
        e
    }
}

pub(crate) fn rows_orthonormal(h: &[Vec<f64>]) -> bool {
    for (i, ri) in h.iter().enumerate() {
        for (j, rj) in h.iter().enumerate().take(i + 1) {
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot(ri, rj) - target).abs() > 1e-12 {
                return false;
            }
        }
    }
    true
}
